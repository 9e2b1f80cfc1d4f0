#pragma once

#include <iosfwd>
#include <string>

#include "lcvar/types.hpp"

namespace lcvar {

// Contract: first row = channel labels, remaining rows = time steps, decimal
// floats, comma separators, LF line endings, UTF-8.
TimeSeriesSample read_csv(std::istream& in);
TimeSeriesSample read_csv_file(const std::string& path);

// `center` subtracts the per-channel mean after parsing.
TimeSeriesSample ingest_csv(const std::string& path, bool center);

void write_csv(std::ostream& out, const TimeSeriesSample& sample);
void write_csv_file(const std::string& path, const TimeSeriesSample& sample);

}  // namespace lcvar
