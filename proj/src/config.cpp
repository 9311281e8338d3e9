#include "bucksmc/config.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "bucksmc/toml.hpp"

namespace bucksmc {

namespace {

const std::vector<std::string> kDefaultParameters = {
    "L", "C_2", "R_s", "L_s", "C_in", "R_c1", "R_c2", "C_1"};

[[noreturn]] void key_fail(const toml::Value& v, const std::string& key,
                           const std::string& what) {
    throw ConfigError("config line " + std::to_string(v.line) + ": key '" + key + "' " + what);
}

double num(const toml::Value& v, const std::string& key) { return v.as_number(key); }

std::uint64_t uint_of(const toml::Value& v, const std::string& key) {
    const double d = v.as_number(key);
    if (d < 0 || d != std::floor(d)) key_fail(v, key, "must be a nonnegative integer");
    return static_cast<std::uint64_t>(d);
}

void check_keys(const toml::Section& s, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : s.entries)
        if (!allowed.contains(key))
            throw ConfigError("config line " + std::to_string(value.line) + ": unknown key '" +
                              key + "' in section [" + s.name + "]");
}

Prior prior_from_table(const toml::Value& v, const std::string& name,
                       std::vector<BroadPrior>& broad) {
    if (v.kind != toml::Value::Kind::Table)
        key_fail(v, name, "must be an inline table { kind = ... }");
    const toml::Value* kind = v.find("kind");
    if (kind == nullptr) key_fail(v, name, "is missing 'kind'");
    const std::string k = kind->as_string("kind");
    auto get = [&](const char* field) -> double {
        const toml::Value* f = v.find(field);
        if (f == nullptr) key_fail(v, name, std::string("is missing '") + field + "'");
        return f->as_number(field);
    };
    for (const auto& [key, sub] : v.table) {
        static const std::set<std::string> ok = {"kind",    "low",    "high",
                                                 "mean",    "var",    "n_probe",
                                                 "n_keep"};
        if (!ok.contains(key)) key_fail(sub, key, "is not a prior setting");
    }
    if (k == "uniform") return Prior::uniform(get("low"), get("high"));
    if (k == "gaussian") return Prior::gaussian(get("mean"), get("var"));
    if (k == "broad") {
        BroadPrior b;
        b.name = name;
        b.low = get("low");
        b.high = get("high");
        if (const toml::Value* p = v.find("n_probe")) b.n_probe = uint_of(*p, "n_probe");
        if (const toml::Value* p = v.find("n_keep")) b.n_keep = uint_of(*p, "n_keep");
        broad.push_back(b);
        // placeholder sampled only if correction is skipped
        return Prior::uniform(b.low, b.high);
    }
    key_fail(*kind, name, "has unknown prior kind '" + k + "'");
}

Prior default_prior(const std::string& name, const ConverterSpec& spec) {
    if (name == "R_s") return Prior::gaussian(0.5, 8.0);
    const double v = get_field(spec, name);
    if (v <= 0.0)
        throw ConfigError("no default prior for parameter '" + name +
                          "' with nonpositive nominal value; give one in [priors]");
    return Prior::uniform(0.0, 2.4 * v);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

ConverterSpec ExperimentConfig::scenario_converter() const {
    ConverterSpec s = converter;
    s.load_step = scenario.load_step;
    return s;
}

void ExperimentConfig::validate() const {
    scenario_converter().validate();
    engine.validate();
    if (parameters.empty()) throw ConfigError("calibration.parameters must not be empty");
    for (const auto& p : parameters) field_info(p);
    for (std::size_t i = 0; i < parameters.size(); ++i)
        for (std::size_t j = i + 1; j < parameters.size(); ++j)
            if (parameters[i] == parameters[j])
                throw ConfigError("duplicate calibration parameter '" + parameters[i] + "'");
    if (priors.size() != parameters.size())
        throw ConfigError("priors must cover exactly the calibrated parameters");
    for (std::size_t i = 0; i < parameters.size(); ++i)
        if (priors.name(i) != parameters[i])
            throw ConfigError("prior order mismatch at '" + priors.name(i) + "'");
    if (!(scenario.steady_state_fraction > 0.0) || scenario.steady_state_fraction > 1.0)
        throw ConfigError("scenario.steady_state_fraction must lie in (0, 1]");
    if (io.synthetic == !io.measurements_path.empty())
        throw ConfigError("io: exactly one of synthetic = true or measurements = \"...\" required");
    if (io.noise_sigma < 0.0) throw ConfigError("io.noise_sigma must be >= 0");
    if (io.out_dir.empty()) throw ConfigError("io.out must not be empty");
    if (correction) {
        field_info(correction->target);
        if (!(correction->low < correction->high))
            throw ConfigError("prior_correction: low must be below high");
        if (correction->n_keep < 1 || correction->n_keep > correction->n_probe)
            throw ConfigError("prior_correction: need 1 <= n_keep <= n_probe");
    }
}

ExperimentConfig load_config_text(const std::string& text) {
    const toml::Document doc = toml::parse(text);
    ExperimentConfig cfg;

    static const std::set<std::string> known_sections = {
        "converter", "calibration", "priors", "scenario", "io", "prior_correction"};
    for (const auto& s : doc.sections)
        if (!known_sections.contains(s.name))
            throw ConfigError("config line " + std::to_string(s.line) + ": unknown section [" +
                              s.name + "]");

    if (const toml::Section* s = doc.find("converter")) {
        std::set<std::string> allowed = {"t_end", "sample_rate", "steps_per_period"};
        for (const auto& f : converter_fields()) allowed.insert(f.name);
        check_keys(*s, allowed);
        for (const auto& [key, value] : s->entries) {
            if (key == "t_end")
                cfg.converter.t_end = num(value, key);
            else if (key == "sample_rate")
                cfg.converter.sample_rate = num(value, key);
            else if (key == "steps_per_period")
                cfg.converter.steps_per_period = static_cast<int>(uint_of(value, key));
            else
                set_field(cfg.converter, key, num(value, key));
        }
    }

    cfg.parameters = kDefaultParameters;
    if (const toml::Section* s = doc.find("calibration")) {
        check_keys(*s, {"parameters", "N", "T", "q", "beta", "epsilon_min", "weight_scheme",
                        "budget_factor", "workers"});
        if (const toml::Value* v = s->find("parameters")) {
            if (v->kind != toml::Value::Kind::Array)
                key_fail(*v, "parameters", "must be an array of parameter names");
            cfg.parameters.clear();
            for (const auto& item : v->array) {
                const std::string& name = item.as_string("parameters");
                try {
                    field_info(name);
                } catch (const SpecError&) {
                    key_fail(item, "parameters", "names unknown parameter '" + name + "'");
                }
                cfg.parameters.push_back(name);
            }
        }
        if (const toml::Value* v = s->find("N")) cfg.engine.N = uint_of(*v, "N");
        if (const toml::Value* v = s->find("T")) cfg.engine.T = static_cast<int>(uint_of(*v, "T"));
        if (const toml::Value* v = s->find("q")) cfg.engine.q = num(*v, "q");
        if (const toml::Value* v = s->find("beta")) cfg.engine.beta = num(*v, "beta");
        if (const toml::Value* v = s->find("epsilon_min")) cfg.engine.epsilon_min = num(*v, "epsilon_min");
        if (const toml::Value* v = s->find("budget_factor"))
            cfg.engine.budget_factor = uint_of(*v, "budget_factor");
        if (const toml::Value* v = s->find("workers"))
            cfg.engine.workers = static_cast<unsigned>(uint_of(*v, "workers"));
        if (const toml::Value* v = s->find("weight_scheme")) {
            const std::string w = v->as_string("weight_scheme");
            if (w == "proposed")
                cfg.engine.weight_scheme = WeightScheme::Proposed;
            else if (w == "baseline")
                cfg.engine.weight_scheme = WeightScheme::Baseline;
            else
                key_fail(*v, "weight_scheme", "must be \"proposed\" or \"baseline\"");
        }
    }

    const toml::Section* priors_section = doc.find("priors");
    if (priors_section != nullptr) {
        std::set<std::string> allowed;
        for (const auto& p : cfg.parameters) allowed.insert(p);
        check_keys(*priors_section, allowed);
    }
    for (const auto& name : cfg.parameters) {
        const toml::Value* v =
            priors_section != nullptr ? priors_section->find(name) : nullptr;
        if (v != nullptr)
            cfg.priors.add(name, prior_from_table(*v, name, cfg.broad_priors));
        else
            cfg.priors.add(name, default_prior(name, cfg.converter));
    }

    if (const toml::Section* s = doc.find("scenario")) {
        check_keys(*s, {"load_step", "steady_state_fraction"});
        if (const toml::Value* v = s->find("steady_state_fraction"))
            cfg.scenario.steady_state_fraction = num(*v, "steady_state_fraction");
        if (const toml::Value* v = s->find("load_step")) {
            if (v->kind != toml::Value::Kind::Table)
                key_fail(*v, "load_step", "must be an inline table { time = ..., R_load = ... }");
            const toml::Value* t = v->find("time");
            const toml::Value* r = v->find("R_load");
            if (t == nullptr || r == nullptr)
                key_fail(*v, "load_step", "needs both 'time' and 'R_load'");
            for (const auto& [key, sub] : v->table)
                if (key != "time" && key != "R_load") key_fail(sub, key, "is not a load_step field");
            cfg.scenario.load_step = LoadStep{t->as_number("time"), r->as_number("R_load")};
        }
    }

    if (const toml::Section* s = doc.find("io")) {
        check_keys(*s, {"synthetic", "measurements", "out", "seed", "noise_sigma"});
        if (const toml::Value* v = s->find("synthetic")) cfg.io.synthetic = v->as_bool("synthetic");
        if (const toml::Value* v = s->find("measurements"))
            cfg.io.measurements_path = v->as_string("measurements");
        if (const toml::Value* v = s->find("out")) cfg.io.out_dir = v->as_string("out");
        if (const toml::Value* v = s->find("seed")) cfg.io.seed = uint_of(*v, "seed");
        if (const toml::Value* v = s->find("noise_sigma")) cfg.io.noise_sigma = num(*v, "noise_sigma");
    }
    cfg.engine.seed = cfg.io.seed;

    if (const toml::Section* s = doc.find("prior_correction")) {
        check_keys(*s, {"target", "low", "high", "n_probe", "n_keep"});
        CorrectionJob job;
        const toml::Value* t = s->find("target");
        if (t == nullptr)
            throw ConfigError("config line " + std::to_string(s->line) +
                              ": [prior_correction] needs a 'target'");
        job.target = t->as_string("target");
        if (const toml::Value* v = s->find("low")) job.low = num(*v, "low");
        if (const toml::Value* v = s->find("high")) job.high = num(*v, "high");
        if (const toml::Value* v = s->find("n_probe")) job.n_probe = uint_of(*v, "n_probe");
        if (const toml::Value* v = s->find("n_keep")) job.n_keep = uint_of(*v, "n_keep");
        cfg.correction = job;
    }

    try {
        cfg.validate();
    } catch (const SpecError& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config_text(ss.str());
}

std::string ExperimentConfig::to_toml() const {
    std::ostringstream o;
    o << "[converter]\n";
    for (const auto& f : converter_fields())
        o << f.name << " = " << fmt(converter.*(f.member)) << "\n";
    o << "t_end = " << fmt(converter.t_end) << "\n";
    o << "sample_rate = " << fmt(converter.sample_rate) << "\n";
    o << "steps_per_period = " << converter.steps_per_period << "\n";

    o << "\n[calibration]\n";
    o << "parameters = [";
    for (std::size_t i = 0; i < parameters.size(); ++i)
        o << (i ? ", " : "") << '"' << parameters[i] << '"';
    o << "]\n";
    o << "N = " << engine.N << "\n";
    o << "T = " << engine.T << "\n";
    o << "q = " << fmt(engine.q) << "\n";
    o << "beta = " << fmt(engine.beta) << "\n";
    o << "epsilon_min = " << fmt(engine.epsilon_min) << "\n";
    o << "weight_scheme = \""
      << (engine.weight_scheme == WeightScheme::Proposed ? "proposed" : "baseline") << "\"\n";
    o << "budget_factor = " << engine.budget_factor << "\n";
    o << "workers = " << engine.workers << "\n";

    o << "\n[priors]\n";
    for (std::size_t i = 0; i < priors.size(); ++i) {
        const std::string& name = priors.name(i);
        bool broad = false;
        for (const auto& b : broad_priors) {
            if (b.name == name) {
                o << name << " = { kind = \"broad\", low = " << fmt(b.low)
                  << ", high = " << fmt(b.high) << ", n_probe = " << b.n_probe
                  << ", n_keep = " << b.n_keep << " }\n";
                broad = true;
            }
        }
        if (broad) continue;
        const Prior& p = priors.prior(i);
        if (p.kind() == Prior::Kind::Uniform)
            o << name << " = { kind = \"uniform\", low = " << fmt(p.low())
              << ", high = " << fmt(p.high()) << " }\n";
        else
            o << name << " = { kind = \"gaussian\", mean = " << fmt(p.gaussian_mean())
              << ", var = " << fmt(p.gaussian_variance()) << " }\n";
    }

    o << "\n[scenario]\n";
    if (scenario.load_step)
        o << "load_step = { time = " << fmt(scenario.load_step->time)
          << ", R_load = " << fmt(scenario.load_step->R_load) << " }\n";
    o << "steady_state_fraction = " << fmt(scenario.steady_state_fraction) << "\n";

    o << "\n[io]\n";
    o << "synthetic = " << (io.synthetic ? "true" : "false") << "\n";
    if (!io.measurements_path.empty()) o << "measurements = \"" << io.measurements_path << "\"\n";
    o << "out = \"" << io.out_dir << "\"\n";
    o << "seed = " << io.seed << "\n";
    o << "noise_sigma = " << fmt(io.noise_sigma) << "\n";

    if (correction) {
        o << "\n[prior_correction]\n";
        o << "target = \"" << correction->target << "\"\n";
        o << "low = " << fmt(correction->low) << "\n";
        o << "high = " << fmt(correction->high) << "\n";
        o << "n_probe = " << correction->n_probe << "\n";
        o << "n_keep = " << correction->n_keep << "\n";
    }
    return o.str();
}

} // namespace bucksmc
