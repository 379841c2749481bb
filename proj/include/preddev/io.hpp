#pragma once

#include "preddev/data.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace preddev {

/// Reads a delimited dataset with header
/// `condition_id,observable,time,replicate,value` and an optional
/// `variance` column. Column order follows the header. Replicates at one
/// time point are kept in replicate-index order. Series without a variance
/// get one from `variances` (keyed by observable) or from estimate_noise.
Dataset load_dataset(const std::string& path, const std::map<std::string, double>& variances = {});
Dataset parse_dataset(std::istream& in, const std::string& source = "<stream>",
                      const std::map<std::string, double>& variances = {});

/// Writes every observation with round-trip precision. The variance column
/// is filled on every row of a series that has one.
void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::string& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Splits one CSV line on commas, trimming surrounding blanks.
std::vector<std::string> split_csv(const std::string& line);

}  // namespace preddev
