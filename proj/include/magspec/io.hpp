#pragma once

#include <string>
#include <vector>

namespace magspec::io {

// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const std::string &path, const std::string &content);

// Lines of a text file without trailing '\r'; throws Error when unreadable.
std::vector<std::string> read_lines(const std::string &path);

bool exists(const std::string &path);

// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

// Two-column plot data, one "x y" pair per line.
std::string two_column(const std::vector<std::pair<double, double>> &rows, const std::string &header = {});

} // namespace magspec::io
