#pragma once

#include <cstddef>
#include <vector>

namespace cfn {

// Small dense symmetric matrix, full row-major storage. set() mirrors the
// entry so symmetry holds exactly by construction.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {}

  int dim() const { return n_; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

  void set(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * n_ + j] = v;
    a_[static_cast<std::size_t>(j) * n_ + i] = v;
  }
  void add(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * n_ + j] += v;
    if (i != j) a_[static_cast<std::size_t>(j) * n_ + i] += v;
  }
  void scale(double s) {
    for (double& v : a_) v *= s;
  }
  void add_scaled(const SymmetricMatrix& other, double w) {
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += w * other.a_[k];
  }

  SymmetricMatrix minus(const SymmetricMatrix& other) const {
    SymmetricMatrix r(n_);
    for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] - other.a_[k];
    return r;
  }

 private:
  int n_ = 0;
  std::vector<double> a_;
};

}  // namespace cfn
