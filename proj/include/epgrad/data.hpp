// Synthetic benchmark generation plus IDX and CSV ingestion.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "epgrad/rng.hpp"
#include "epgrad/types.hpp"

namespace epgrad {

struct Dataset {
  Mat x;                    // N x d
  std::vector<int> labels;  // N, values in [0, num_classes)
  int num_classes = 0;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxMagicError : public DataError {
 public:
  using DataError::DataError;
};
class IdxTruncatedError : public DataError {
 public:
  using DataError::DataError;
};
class IdxCountMismatchError : public DataError {
 public:
  using DataError::DataError;
};
class CsvError : public DataError {
 public:
  using DataError::DataError;
};

// Gaussian class blobs: K means drawn uniformly on the radius-`margin`
// sphere in R^d, samples N(mean, spread^2 I), deterministic per seed,
// 80/20 train/test split per class. Throws on K < 2, d < 2 or bad counts.
DatasetPair gaussian_blobs(int num_classes, int dim, int n_per_class,
                           double spread, double margin, std::uint64_t seed);

// IDX (big-endian) image + label files; pixels scaled to [0, 1], images
// flattened row-major. Throws IdxMagicError / IdxTruncatedError /
// IdxCountMismatchError.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Numeric CSV with an optional header row; label_col indexes columns
// (negative counts from the end, -1 = last). Throws CsvError with the
// offending row/column on non-numeric cells.
Dataset load_csv(const std::string& path, int label_col);

// Deterministic per-sample split; keeps class labels intact.
DatasetPair split_train_test(const Dataset& ds, double test_fraction, Rng& rng);

// Zero-mean unit-variance features using statistics of the train split only;
// zero stddev columns are clamped to 1 so constant features pass through.
void standardize(Dataset& train, Dataset& test);

}  // namespace epgrad
