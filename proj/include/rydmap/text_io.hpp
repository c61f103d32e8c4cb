#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rydmap::text {

/// Shortest decimal text that reads back to the same double.
/// Non-finite values print as "nan", "inf", "-inf".
std::string format_double(double value);

/// Strict double parse of the whole field (surrounding blanks allowed).
/// Throws std::invalid_argument naming `what` on failure.
double parse_double(std::string_view field, std::string_view what = "number");
long long parse_int(std::string_view field, std::string_view what = "integer");

/// Splits one CSV line. Fields may be double-quoted; "" inside quotes is a quote.
std::vector<std::string> split_csv(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view field);

/// JSON-style list "[a,b,...]" of shortest-round-trip doubles.
std::string format_list(std::span<const double> values);

std::string_view trim(std::string_view s);

}  // namespace rydmap::text
