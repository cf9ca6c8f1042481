#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lfopt/vectors.hpp"

namespace lfopt {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Dataset {
  std::vector<SparseVector> instances;
  std::vector<std::uint32_t> labels;
  std::size_t dim = 0;
  std::uint32_t num_classes = 0;
  // Original label text for each class id, in class-id order.
  std::vector<std::string> class_names;

  std::size_t size() const { return instances.size(); }
  void validate() const;
};

struct ParseOptions {
  // Map {-1, +1} onto {0, 1} regardless of which labels appear.
  bool binary_relabel = false;
};

Dataset parse_libsvm(std::string_view text, const ParseOptions& opts = {});
Dataset parse_libsvm(std::istream& in, const ParseOptions& opts = {});
Dataset load_libsvm(const std::string& path, const ParseOptions& opts = {});

// Canonical LIBSVM text: "<class_name> idx:val ..." with 1-based indices and
// values printed with 17 significant digits.
std::string serialize_libsvm(const Dataset& data);

// Divides every feature by its largest absolute value over the dataset.
// Returns the per-feature scale factors (1 where a feature is all zero).
std::vector<double> scale_max_abs(Dataset& data);

// Keeps only instances of the two given classes, relabelled 0 and 1.
// With no pair, class `positive` becomes 1 and everything else 0.
Dataset binarize(const Dataset& data, std::uint32_t positive);
Dataset select_class_pair(const Dataset& data, std::uint32_t neg, std::uint32_t pos);

// First `count` instances (or all when count >= size).
Dataset head(const Dataset& data, std::size_t count);

// Dense synthetic logistic-regression problem: x ~ N(0, I/d), labels from a
// random hyperplane with `flip_prob` label noise.
Dataset make_synthetic_logreg(std::size_t n, std::size_t d, std::uint64_t seed,
                              double flip_prob = 0.1);

// Synthetic K-class problem: Gaussian blobs around random centres.
Dataset make_synthetic_multiclass(std::size_t n, std::size_t d, std::uint32_t k,
                                  std::uint64_t seed);

}  // namespace lfopt
