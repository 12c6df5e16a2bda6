#include "mlmeval/table.h"

#include <algorithm>
#include <cstdio>

namespace mlmeval {
namespace {

// Display width in code points, so UTF-8 language names still line up.
std::size_t Width(const std::string &s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

}  // namespace

std::string Table::Tsv() const {
  std::string out;
  auto line = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += '\t';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto &r : rows) line(r);
  return out;
}

std::string Table::Text() const {
  std::vector<std::size_t> widths(header.size(), 0);
  auto measure = [&](const std::vector<std::string> &cells) {
    for (std::size_t i = 0; i < cells.size() && i < widths.size(); ++i) {
      widths[i] = std::max(widths[i], Width(cells[i]));
    }
  };
  measure(header);
  for (const auto &r : rows) measure(r);
  std::string out;
  auto line = [&](const std::vector<std::string> &cells) {
    std::string text;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text += "  ";
      text += cells[i];
      if (i + 1 < cells.size() && i < widths.size()) {
        text.append(widths[i] - Width(cells[i]), ' ');
      }
    }
    out += text + '\n';
  };
  line(header);
  for (const auto &r : rows) line(r);
  return out;
}

std::string FormatFixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return buf;
}

}  // namespace mlmeval
