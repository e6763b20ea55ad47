#include "epgrad/data.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace epgrad {

DatasetPair gaussian_blobs(int num_classes, int dim, int n_per_class,
                           double spread, double margin, std::uint64_t seed) {
  if (num_classes < 2 || dim < 2 || n_per_class < 5 || spread < 0.0 ||
      margin <= 0.0) {
    throw std::invalid_argument("gaussian_blobs: invalid parameters");
  }
  Rng rng(seed);
  Mat means(num_classes, dim);
  for (int k = 0; k < num_classes; ++k) {
    RowVec dir(dim);
    for (int j = 0; j < dim; ++j) dir[j] = rng.normal();
    means.row(k) = dir / dir.norm() * margin;
  }

  const int n_train = (n_per_class * 4) / 5;
  const int n_test = n_per_class - n_train;
  DatasetPair out;
  out.train.num_classes = out.test.num_classes = num_classes;
  out.train.x = Mat(static_cast<Index>(num_classes) * n_train, dim);
  out.test.x = Mat(static_cast<Index>(num_classes) * n_test, dim);
  for (int k = 0; k < num_classes; ++k) {
    for (int s = 0; s < n_per_class; ++s) {
      RowVec sample(dim);
      for (int j = 0; j < dim; ++j) {
        sample[j] = means(k, j) + spread * rng.normal();
      }
      if (s < n_train) {
        out.train.x.row(static_cast<Index>(k) * n_train + s) = sample;
        out.train.labels.push_back(k);
      } else {
        out.test.x.row(static_cast<Index>(k) * n_test + (s - n_train)) = sample;
        out.test.labels.push_back(k);
      }
    }
  }
  return out;
}

namespace {

std::uint32_t read_be32(std::istream& f, const std::string& what) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) {
    throw IdxTruncatedError("idx: truncated while reading " + what);
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream imgf(images_path, std::ios::binary);
  if (!imgf) throw DataError("idx: cannot open " + images_path);
  std::ifstream labf(labels_path, std::ios::binary);
  if (!labf) throw DataError("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(imgf, "image magic");
  if (img_magic != 0x00000803u) {
    std::ostringstream os;
    os << "idx: bad image magic 0x" << std::hex << img_magic
       << " (expected 0x803)";
    throw IdxMagicError(os.str());
  }
  const std::uint32_t n_img = read_be32(imgf, "image count");
  const std::uint32_t rows = read_be32(imgf, "row count");
  const std::uint32_t cols = read_be32(imgf, "column count");

  const std::uint32_t lab_magic = read_be32(labf, "label magic");
  if (lab_magic != 0x00000801u) {
    std::ostringstream os;
    os << "idx: bad label magic 0x" << std::hex << lab_magic
       << " (expected 0x801)";
    throw IdxMagicError(os.str());
  }
  const std::uint32_t n_lab = read_be32(labf, "label count");
  if (n_img != n_lab) {
    throw IdxCountMismatchError("idx: " + std::to_string(n_img) +
                                " images vs " + std::to_string(n_lab) +
                                " labels");
  }

  const std::size_t pix = std::size_t(rows) * cols;
  std::vector<unsigned char> buf(pix);
  Dataset ds;
  ds.x = Mat(n_img, static_cast<Index>(pix));
  ds.labels.resize(n_img);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    if (!imgf.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(pix))) {
      throw IdxTruncatedError("idx: truncated image data at image " +
                              std::to_string(i));
    }
    for (std::size_t p = 0; p < pix; ++p) {
      ds.x(i, static_cast<Index>(p)) = buf[p] / 255.0;
    }
  }
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    unsigned char y;
    if (!labf.read(reinterpret_cast<char*>(&y), 1)) {
      throw IdxTruncatedError("idx: truncated label data at label " +
                              std::to_string(i));
    }
    ds.labels[i] = y;
    if (y > max_label) max_label = y;
  }
  ds.num_classes = max_label + 1;
  return ds;
}

Dataset load_csv(const std::string& path, int label_col) {
  std::ifstream f(path);
  if (!f) throw DataError("csv: cannot open " + path);

  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool maybe_header = true;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      ++col;
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(cell[used])) ++used;
        if (used != cell.size()) throw std::invalid_argument("trailing junk");
        row.push_back(v);
      } catch (const std::exception&) {
        if (maybe_header) {
          numeric = false;  // header row, skip it
          break;
        }
        throw CsvError("csv: non-numeric cell at row " +
                       std::to_string(line_no) + ", column " +
                       std::to_string(col));
      }
    }
    maybe_header = false;
    if (!numeric) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw CsvError("csv: row " + std::to_string(line_no) +
                     " has inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("csv: no data rows in " + path);

  const int n_cols = static_cast<int>(rows.front().size());
  int lc = label_col < 0 ? n_cols + label_col : label_col;
  if (lc < 0 || lc >= n_cols) {
    throw std::invalid_argument("csv: label column out of range");
  }
  Dataset ds;
  ds.x = Mat(static_cast<Index>(rows.size()), n_cols - 1);
  ds.labels.resize(rows.size());
  int max_label = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int out_j = 0;
    for (int j = 0; j < n_cols; ++j) {
      if (j == lc) {
        const double y = rows[i][static_cast<std::size_t>(j)];
        if (y < 0 || y != std::floor(y)) {
          throw CsvError("csv: label at row " + std::to_string(i + 1) +
                         " is not a non-negative integer");
        }
        ds.labels[i] = static_cast<int>(y);
        if (ds.labels[i] > max_label) max_label = ds.labels[i];
      } else {
        ds.x(static_cast<Index>(i), out_j++) = rows[i][static_cast<std::size_t>(j)];
      }
    }
  }
  ds.num_classes = max_label + 1;
  return ds;
}

DatasetPair split_train_test(const Dataset& ds, double test_fraction,
                             Rng& rng) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw std::invalid_argument("split_train_test: fraction outside (0,1)");
  }
  std::vector<int> order(ds.labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);
  const std::size_t n_test =
      static_cast<std::size_t>(std::floor(test_fraction * order.size()));
  DatasetPair out;
  out.train.num_classes = out.test.num_classes = ds.num_classes;
  out.test.x = Mat(static_cast<Index>(n_test), ds.x.cols());
  out.train.x = Mat(static_cast<Index>(order.size() - n_test), ds.x.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int src = order[i];
    if (i < n_test) {
      out.test.x.row(static_cast<Index>(i)) = ds.x.row(src);
      out.test.labels.push_back(ds.labels[static_cast<std::size_t>(src)]);
    } else {
      out.train.x.row(static_cast<Index>(i - n_test)) = ds.x.row(src);
      out.train.labels.push_back(ds.labels[static_cast<std::size_t>(src)]);
    }
  }
  return out;
}

void standardize(Dataset& train, Dataset& test) {
  const Index d = train.x.cols();
  RowVec mean = train.x.colwise().mean();
  RowVec sd(d);
  for (Index j = 0; j < d; ++j) {
    const double var =
        (train.x.col(j).array() - mean[j]).square().sum() /
        static_cast<double>(train.x.rows());
    sd[j] = std::sqrt(var);
    if (sd[j] == 0.0) sd[j] = 1.0;  // constant column passes through
  }
  for (Index j = 0; j < d; ++j) {
    train.x.col(j) = (train.x.col(j).array() - mean[j]) / sd[j];
    test.x.col(j) = (test.x.col(j).array() - mean[j]) / sd[j];
  }
}

}  // namespace epgrad
