#ifndef MLMEVAL_TABLE_H_
#define MLMEVAL_TABLE_H_

#include <string>
#include <vector>

namespace mlmeval {

// Small string table rendered as TSV or as left-aligned plain text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string Tsv() const;
  std::string Text() const;
};

// Fixed-point formatting, e.g. FormatFixed(86.03, 2) == "86.03".
std::string FormatFixed(double value, int precision);

}  // namespace mlmeval

#endif  // MLMEVAL_TABLE_H_
