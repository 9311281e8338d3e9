#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bucksmc/converter.hpp"

namespace bucksmc {

/// One calibratable scalar field of ConverterSpec.
struct FieldInfo {
    const char* name;
    const char* unit;
    double ConverterSpec::*member;
};

/// Registry of all scalar ConverterSpec fields addressable by name.
std::span<const FieldInfo> converter_fields();

/// Looks a field up by name; throws SpecError naming the unknown field.
const FieldInfo& field_info(std::string_view name);

double get_field(const ConverterSpec& spec, std::string_view name);
void set_field(ConverterSpec& spec, std::string_view name, double value);

/// Ordered subset of calibratable parameters with names and units.
class ParameterVector {
public:
    struct Entry {
        std::string name;
        double value = 0.0;
        std::string unit;
    };

    ParameterVector() = default;

    /// Builds entries for the given field names, values taken from spec.
    static ParameterVector from_spec(const ConverterSpec& spec,
                                     std::span<const std::string> names);

    void push_back(std::string name, double value, std::string unit = {});

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    Entry& operator[](std::size_t i) { return entries_[i]; }

    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    /// Index of the named entry, or -1.
    int index_of(std::string_view name) const;

    std::vector<double> values() const;
    void set_values(std::span<const double> v);

    /// Throws SpecError on duplicate names or non-finite values.
    void validate() const;

private:
    std::vector<Entry> entries_;
};

/// Returns spec with every entry of overrides applied to its named field.
ConverterSpec apply_overrides(const ConverterSpec& spec, const ParameterVector& overrides);

/// simulate() with named parameter overrides; divergence errors carry the
/// override values.
Waveform simulate(const ConverterSpec& spec, const ParameterVector& overrides);

} // namespace bucksmc
