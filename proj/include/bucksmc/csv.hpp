#pragma once

#include <string>

#include "bucksmc/converter.hpp"

namespace bucksmc {

/// Writes a waveform as CSV with header "t,v_out,i_out", one row per sample,
/// full double precision. Byte-identical for identical waveforms.
void write_waveform_csv(const std::string& path, const Waveform& w);

/// Reads a waveform written by write_waveform_csv; the round trip is exact.
Waveform read_waveform_csv(const std::string& path);

} // namespace bucksmc
