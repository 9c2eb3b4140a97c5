#ifndef RLPP_IO_HPP_
#define RLPP_IO_HPP_

#include <string>

namespace rlpp {

/// Writes to `path.tmp` and renames over `path`; parent directories are created.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

std::string join_path(const std::string& dir, const std::string& name);

}  // namespace rlpp

#endif  // RLPP_IO_HPP_
