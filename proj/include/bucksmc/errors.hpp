#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bucksmc {

/// Invalid or inconsistent converter/engine description.
class SpecError : public std::runtime_error {
public:
    explicit SpecError(const std::string& msg) : std::runtime_error(msg) {}
};

/// The circuit equations have no unique solution for the requested mode.
class DegenerateTopologyError : public std::runtime_error {
public:
    explicit DegenerateTopologyError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A state left the admissible range during integration. Carries the
/// parameter overrides that produced the run, when known.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& msg, double t_fail)
        : std::runtime_error(msg), t_fail_(t_fail) {}

    double time_of_failure() const { return t_fail_; }

    const std::vector<std::pair<std::string, double>>& params() const { return params_; }
    void set_params(std::vector<std::pair<std::string, double>> p) { params_ = std::move(p); }

private:
    double t_fail_ = 0.0;
    std::vector<std::pair<std::string, double>> params_;
};

/// Two waveforms were compared on different sample grids.
class GridMismatchError : public std::runtime_error {
public:
    explicit GridMismatchError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Prior correction could not produce a fit (e.g. every probe diverged).
class CorrectionError : public std::runtime_error {
public:
    explicit CorrectionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Config file problem; message carries key and line where possible.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bucksmc
