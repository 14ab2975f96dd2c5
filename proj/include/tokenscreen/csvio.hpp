#ifndef TOKENSCREEN_CSVIO_HPP
#define TOKENSCREEN_CSVIO_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "types.hpp"

namespace tokenscreen {

// 17 significant digits round-trip a double exactly, so equal numbers always
// serialize to equal bytes and golden-file comparisons are byte comparisons.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path), cols_(header.size()) {
    if (!out_) throw validation_error("cannot open output file: " + path);
    for (std::size_t j = 0; j < header.size(); ++j)
      out_ << (j ? "," : "") << header[j];
    out_ << "\n";
  }

  void row(const Vec& values) {
    if (values.size() != cols_)
      throw validation_error("csv row width does not match the header");
    for (std::size_t j = 0; j < values.size(); ++j)
      out_ << (j ? "," : "") << fmt17(values[j]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t cols_;
};

// Order-preserving JSON emitter with fmt17 numbers. nlohmann::json is used
// for parsing configs, but its dump() picks shortest representations; report
// files promise 17 significant digits, hence this small builder.
class JsonBuilder {
 public:
  // JSON has no literal for nonfinite values; "inf"/"nan" become strings
  JsonBuilder& put(const std::string& key, double v) {
    return raw(key, std::isfinite(v) ? fmt17(v) : quote(fmt17(v)));
  }
  JsonBuilder& put(const std::string& key, int v) { return raw(key, std::to_string(v)); }
  JsonBuilder& put(const std::string& key, std::size_t v) { return raw(key, std::to_string(v)); }
  JsonBuilder& put(const std::string& key, bool v) { return raw(key, v ? "true" : "false"); }
  JsonBuilder& put(const std::string& key, const std::string& v) {
    return raw(key, quote(v));
  }
  JsonBuilder& put(const std::string& key, const char* v) {
    return raw(key, quote(v));
  }
  JsonBuilder& put(const std::string& key, const JsonBuilder& obj) {
    entries_.push_back({key, "", {obj}, false});
    return *this;
  }
  JsonBuilder& put_array(const std::string& key, const std::vector<JsonBuilder>& items) {
    entries_.push_back({key, "", items, true});
    return *this;
  }

  std::string str(int indent = 0) const {
    std::string pad(indent, ' '), pad2(indent + 2, ' ');
    std::string out = "{\n";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const Entry& e = entries_[i];
      out += pad2 + quote(e.key) + ": ";
      if (e.children.empty() && !e.is_array) {
        out += e.scalar;
      } else if (e.is_array) {
        out += "[\n";
        for (std::size_t k = 0; k < e.children.size(); ++k) {
          out += std::string(indent + 4, ' ') + e.children[k].str(indent + 4);
          out += (k + 1 < e.children.size()) ? ",\n" : "\n";
        }
        out += pad2 + "]";
      } else {
        out += e.children.front().str(indent + 2);
      }
      out += (i + 1 < entries_.size()) ? ",\n" : "\n";
    }
    out += pad + "}";
    return out;
  }

 private:
  struct Entry {
    std::string key;
    std::string scalar;
    std::vector<JsonBuilder> children;
    bool is_array = false;
  };

  static std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }

  JsonBuilder& raw(const std::string& key, std::string v) {
    entries_.push_back({key, std::move(v), {}, false});
    return *this;
  }

  std::vector<Entry> entries_;
};

}  // namespace tokenscreen

#endif
