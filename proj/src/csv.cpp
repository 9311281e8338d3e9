#include "bucksmc/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bucksmc {

void write_waveform_csv(const std::string& path, const Waveform& w) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError("cannot write waveform file '" + path + "'");
    out << "t,v_out,i_out\n";
    char buf[128];
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", w.t[i], w.V_out[i], w.I_out[i]);
        out << buf;
    }
    if (!out) throw SpecError("failed writing waveform file '" + path + "'");
}

Waveform read_waveform_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open waveform file '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,v_out,i_out", 0) != 0)
        throw SpecError("waveform file '" + path + "' is missing the t,v_out,i_out header");
    Waveform w;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double t, v, i;
        char* end = nullptr;
        t = std::strtod(line.c_str(), &end);
        if (end == nullptr || *end != ',')
            throw SpecError("waveform file '" + path + "': malformed row at line " +
                            std::to_string(line_no));
        v = std::strtod(end + 1, &end);
        if (end == nullptr || *end != ',')
            throw SpecError("waveform file '" + path + "': malformed row at line " +
                            std::to_string(line_no));
        i = std::strtod(end + 1, &end);
        w.t.push_back(t);
        w.V_out.push_back(v);
        w.I_out.push_back(i);
    }
    if (w.empty()) throw SpecError("waveform file '" + path + "' holds no samples");
    for (std::size_t k = 1; k < w.size(); ++k)
        if (!(w.t[k] > w.t[k - 1]))
            throw SpecError("waveform file '" + path + "': time must increase strictly");
    return w;
}

} // namespace bucksmc
