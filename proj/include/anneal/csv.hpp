#pragma once
// CSV emission with stable formatting (round-trip %.17g) so identical runs
// produce byte-identical files.

#include <optional>
#include <string>
#include <vector>

namespace anneal {

std::string fmt_double(double v);

std::string csv_join(const std::vector<std::string>& cells);

// Atomic file replace: write to <path>.tmp then rename.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// Stable short hash of a parameter string (sweep cell identity).
std::string params_hash(const std::string& key);

inline const char* kValueHeader = "family,d,epsilon,h,ell,replicate,estimator,value,seed";
inline const char* kSummaryHeader =
    "estimator,d,epsilon,h,replicates,estimate,variance,stderr,reference,abs_error";
inline const char* kCheckHeader = "check,params_hash,bound,observed,slack,pass";

} // namespace anneal
