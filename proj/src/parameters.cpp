#include "bucksmc/parameters.hpp"

#include <array>
#include <cmath>

namespace bucksmc {

namespace {

constexpr std::array<FieldInfo, 16> kFields{{
    {"V_in", "V", &ConverterSpec::V_in},
    {"D", "", &ConverterSpec::D},
    {"f_sw", "Hz", &ConverterSpec::f_sw},
    {"L", "H", &ConverterSpec::L},
    {"R_L", "ohm", &ConverterSpec::R_L},
    {"R_M", "ohm", &ConverterSpec::R_M},
    {"V_d", "V", &ConverterSpec::V_d},
    {"L_s", "H", &ConverterSpec::L_s},
    {"R_s", "ohm", &ConverterSpec::R_s},
    {"C_in", "F", &ConverterSpec::C_in},
    {"R_cin", "ohm", &ConverterSpec::R_cin},
    {"C_1", "F", &ConverterSpec::C_1},
    {"R_c1", "ohm", &ConverterSpec::R_c1},
    {"C_2", "F", &ConverterSpec::C_2},
    {"R_c2", "ohm", &ConverterSpec::R_c2},
    {"R_load", "ohm", &ConverterSpec::R_load},
}};

} // namespace

std::span<const FieldInfo> converter_fields() { return kFields; }

const FieldInfo& field_info(std::string_view name) {
    for (const auto& f : kFields)
        if (name == f.name) return f;
    throw SpecError("unknown converter parameter '" + std::string(name) + "'");
}

double get_field(const ConverterSpec& spec, std::string_view name) {
    return spec.*(field_info(name).member);
}

void set_field(ConverterSpec& spec, std::string_view name, double value) {
    spec.*(field_info(name).member) = value;
}

ParameterVector ParameterVector::from_spec(const ConverterSpec& spec,
                                           std::span<const std::string> names) {
    ParameterVector pv;
    for (const auto& n : names) {
        const FieldInfo& f = field_info(n);
        pv.push_back(n, spec.*(f.member), f.unit);
    }
    return pv;
}

void ParameterVector::push_back(std::string name, double value, std::string unit) {
    entries_.push_back({std::move(name), value, std::move(unit)});
}

int ParameterVector::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<double> ParameterVector::values() const {
    std::vector<double> v;
    v.reserve(entries_.size());
    for (const auto& e : entries_) v.push_back(e.value);
    return v;
}

void ParameterVector::set_values(std::span<const double> v) {
    if (v.size() != entries_.size())
        throw SpecError("ParameterVector: value count mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) entries_[i].value = v[i];
}

void ParameterVector::validate() const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!std::isfinite(entries_[i].value))
            throw SpecError("parameter '" + entries_[i].name + "' is not finite");
        for (std::size_t j = i + 1; j < entries_.size(); ++j)
            if (entries_[i].name == entries_[j].name)
                throw SpecError("duplicate parameter '" + entries_[i].name + "'");
    }
}

ConverterSpec apply_overrides(const ConverterSpec& spec, const ParameterVector& overrides) {
    ConverterSpec out = spec;
    for (const auto& e : overrides) set_field(out, e.name, e.value);
    return out;
}

Waveform simulate(const ConverterSpec& spec, const ParameterVector& overrides) {
    try {
        return simulate(apply_overrides(spec, overrides));
    } catch (DivergenceError& err) {
        std::vector<std::pair<std::string, double>> p;
        for (const auto& e : overrides) p.emplace_back(e.name, e.value);
        err.set_params(std::move(p));
        throw;
    }
}

} // namespace bucksmc
