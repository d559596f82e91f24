#pragma once

// Explicit dense tensors. These are the brute-force reference for the
// tensor-free computations and the core of the explicit MM/GMM baselines.
// Storage is row-major over the multi-index: index(i_1..i_k) = sum_j i_j d^{k-j}.

#include <dgmm/common.hpp>
#include <dgmm/model.hpp>

#include <numeric>
#include <vector>

namespace dgmm {

inline constexpr int kMaxSymOrder = 6;
inline constexpr std::size_t kMaxTensorEntries = 10'000'000;

inline std::size_t tensor_size(int d, int k) {
  std::size_t n = 1;
  for (int i = 0; i < k; ++i) {
    n *= static_cast<std::size_t>(d);
    require(n <= kMaxTensorEntries, Errc::guard_exceeded,
            "explicit tensor of order " + std::to_string(k) + " in dimension " + std::to_string(d) +
                " exceeds the storage guard");
  }
  return n;
}

class DenseTensor {
 public:
  DenseTensor() = default;
  DenseTensor(int order, int dim)
      : order_(order), dim_(dim), data_(tensor_size(dim, order), 0.0) {
    require(order >= 0 && dim >= 1, Errc::invalid_argument, "bad tensor shape");
  }

  int order() const { return order_; }
  int dim() const { return dim_; }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<int> idx) { return data_[flat(idx)]; }
  double at(std::initializer_list<int> idx) const { return data_[flat(idx)]; }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  Eigen::Map<Vector> vec() { return {data_.data(), static_cast<Index>(data_.size())}; }
  Eigen::Map<const Vector> vec() const { return {data_.data(), static_cast<Index>(data_.size())}; }

  DenseTensor& operator+=(const DenseTensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  DenseTensor& operator-=(const DenseTensor& o) {
    check_same(o);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  DenseTensor& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  void check_same(const DenseTensor& o) const {
    require(order_ == o.order_ && dim_ == o.dim_, Errc::shape_mismatch, "tensor shape mismatch");
  }

  /// Multi-index of flat position `pos` (row-major).
  void unravel(std::size_t pos, std::vector<int>& idx) const {
    idx.resize(order_);
    for (int j = order_ - 1; j >= 0; --j) {
      idx[j] = static_cast<int>(pos % dim_);
      pos /= dim_;
    }
  }
  std::size_t ravel(const std::vector<int>& idx) const {
    std::size_t pos = 0;
    for (int v : idx) pos = pos * dim_ + v;
    return pos;
  }

 private:
  std::size_t flat(std::initializer_list<int> idx) const {
    require(static_cast<int>(idx.size()) == order_, Errc::shape_mismatch, "index arity != order");
    std::size_t pos = 0;
    for (int v : idx) pos = pos * dim_ + v;
    return pos;
  }

  int order_ = 0;
  int dim_ = 1;
  std::vector<double> data_{0.0};
};

inline DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
inline DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }

/// Average of the tensor over all k! index permutations.
inline DenseTensor sym(const DenseTensor& t) {
  const int k = t.order();
  require(k <= kMaxSymOrder, Errc::unsupported_order,
          "symmetrisation enumerates k! permutations; order " + std::to_string(k) + " > 6");
  if (k <= 1) return t;
  std::vector<int> perm(k);
  std::vector<std::vector<int>> perms;
  std::iota(perm.begin(), perm.end(), 0);
  do {
    perms.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double inv = 1.0 / static_cast<double>(perms.size());

  DenseTensor out(k, t.dim());
  std::vector<int> idx, permuted(k);
  for (std::size_t pos = 0; pos < t.size(); ++pos) {
    t.unravel(pos, idx);
    double acc = 0.0;
    for (const auto& p : perms) {
      for (int j = 0; j < k; ++j) permuted[j] = idx[p[j]];
      acc += t[t.ravel(permuted)];
    }
    out[pos] = acc * inv;
  }
  return out;
}

inline double tensor_inner(const DenseTensor& a, const DenseTensor& b) {
  a.check_same(b);
  return a.vec().dot(b.vec());
}

inline double tensor_norm(const DenseTensor& a) { return std::sqrt(tensor_inner(a, a)); }

/// a (order p) ⊗ b (order q) -> order p + q.
inline DenseTensor outer(const DenseTensor& a, const DenseTensor& b) {
  require(a.dim() == b.dim(), Errc::shape_mismatch, "outer product of different dimensions");
  DenseTensor out(a.order() + b.order(), a.dim());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[pos++] = a[i] * b[j];
  return out;
}

inline DenseTensor scalar_tensor(int dim, double value) {
  DenseTensor t(0, dim);
  t[0] = value;
  return t;
}

inline DenseTensor vector_tensor(const Vector& v) {
  DenseTensor t(1, static_cast<int>(v.size()));
  for (Index i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

inline DenseTensor matrix_tensor(const Matrix& m) {
  require(m.rows() == m.cols(), Errc::shape_mismatch, "matrix tensor must be square");
  DenseTensor t(2, static_cast<int>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) t[i * m.cols() + j] = m(i, j);
  return t;
}

inline DenseTensor outer_power(const Vector& y, int k) {
  require(k >= 0, Errc::invalid_argument, "outer power order must be non-negative");
  const int d = static_cast<int>(y.size());
  DenseTensor out(k, d);
  // Build by repeated expansion so the cost is O(d^k).
  std::size_t len = 1;
  out[0] = 1.0;
  for (int level = 0; level < k; ++level) {
    for (std::size_t i = len; i-- > 0;) {
      const double base = out[i];
      for (int c = d - 1; c >= 0; --c) out[i * d + c] = base * y[c];
    }
    len *= d;
  }
  return out;
}

/// (1/N) sum_n y_n^{⊗k}.
inline DenseTensor sample_moment_tensor(const Matrix& data, int k) {
  require(data.rows() >= 1, Errc::empty_sample, "moment of an empty sample");
  const int d = static_cast<int>(data.cols());
  DenseTensor acc(k, d);
  for (Index n = 0; n < data.rows(); ++n) acc += outer_power(data.row(n).transpose(), k);
  acc *= 1.0 / static_cast<double>(data.rows());
  return acc;
}

inline double moment_coefficient(int k, int l) {
  return factorial(k) / (factorial(k - 2 * l) * factorial(l) * std::pow(2.0, l));
}

/// sum_j sum_l pi_j C_{k,l} Sym(mu_j^{⊗(k-2l)} ⊗ Sigma_j^{⊗l}).
inline DenseTensor population_moment_tensor(const MixtureParams& p, int k) {
  require(k >= 0 && k <= kMaxSymOrder, Errc::unsupported_order,
          "explicit population moment supports orders up to 6");
  const int d = p.dim();
  DenseTensor total(k, d);
  for (int j = 0; j < p.components(); ++j) {
    const DenseTensor sigma = matrix_tensor(p.covariance(j));
    for (int l = 0; 2 * l <= k; ++l) {
      DenseTensor term = outer_power(p.centers[j], k - 2 * l);
      for (int r = 0; r < l; ++r) term = outer(term, sigma);
      term = sym(term);
      term *= p.weights[j] * moment_coefficient(k, l);
      total += term;
    }
  }
  return total;
}

inline Index moment_vector_length(int d, int L) {
  Index q = 0;
  Index block = 1;
  for (int k = 1; k <= L; ++k) {
    block *= d;
    q += block;
  }
  return q;
}

/// Stacked vec(M^(k)(theta) - y^{⊗k}) for k = 1..L.
inline Vector moment_function_g(const MixtureParams& p, const Vector& y, int L,
                                const std::vector<DenseTensor>* moments = nullptr) {
  require(L >= 1 && L <= 4, Errc::guard_exceeded, "explicit moment function supports L <= 4");
  const int d = p.dim();
  Vector g(moment_vector_length(d, L));
  Index off = 0;
  for (int k = 1; k <= L; ++k) {
    const DenseTensor M = moments ? (*moments)[k - 1] : population_moment_tensor(p, k);
    const DenseTensor yk = outer_power(y, k);
    for (std::size_t i = 0; i < M.size(); ++i) g[off + static_cast<Index>(i)] = M[i] - yk[i];
    off += static_cast<Index>(M.size());
  }
  return g;
}

/// Contracts the last index with v: order k -> k-1.
inline DenseTensor contract_last(const DenseTensor& t, const Vector& v) {
  require(t.order() >= 1, Errc::invalid_argument, "cannot contract a scalar");
  const int d = t.dim();
  DenseTensor out(t.order() - 1, d);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (int c = 0; c < d; ++c) acc += t[i * d + c] * v[c];
    out[i] = acc;
  }
  return out;
}

/// Contracts the last two indices with S (entry (s,t) pairs with i_{k-1}=s, i_k=t).
inline DenseTensor contract_last2(const DenseTensor& t, const Matrix& S) {
  require(t.order() >= 2, Errc::invalid_argument, "need order >= 2 to contract a matrix");
  const int d = t.dim();
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  DenseTensor out(t.order() - 2, d);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    const double* blk = t.values().data() + i * dd;
    for (int s = 0; s < d; ++s)
      for (int c = 0; c < d; ++c) acc += blk[s * d + c] * S(s, c);
    out[i] = acc;
  }
  return out;
}

/// Gradient blocks of f(theta) = <M^(k)(theta), R> for a fixed symmetric R,
/// accumulated (times `scale`) into grad_pi / grad_mu / grad_V.
inline void accumulate_moment_contraction_gradient(const MixtureParams& p, int k,
                                                   const DenseTensor& R_sym, double scale,
                                                   Vector& grad_pi, std::vector<Vector>& grad_mu,
                                                   std::vector<Matrix>& grad_V) {
  const int d = p.dim();
  for (int j = 0; j < p.components(); ++j) {
    const Matrix sigma = p.covariance(j);
    const double pj = p.weights[j];
    for (int l = 0; 2 * l <= k; ++l) {
      const int a = k - 2 * l;
      const double c = moment_coefficient(k, l) * scale;
      // Contract all covariance slots but (possibly) one, then the center slots.
      DenseTensor r_sig = R_sym;
      for (int s = 0; s + 1 < l; ++s) r_sig = contract_last2(r_sig, sigma);
      DenseTensor r_full = l >= 1 ? contract_last2(r_sig, sigma) : r_sig;
      // r_full has order a.
      DenseTensor r_mu = r_full;
      for (int s = 0; s + 1 < a; ++s) r_mu = contract_last(r_mu, p.centers[j]);
      // r_mu has order min(a, 1) (order 1 when a >= 1).
      double value;
      if (a >= 1) {
        value = contract_last(r_mu, p.centers[j])[0];
        Vector gm(d);
        for (int i = 0; i < d; ++i) gm[i] = r_mu[i];
        grad_mu[j] += (c * pj * a) * gm;
      } else {
        value = r_full[0];
      }
      grad_pi[j] += c * value;
      if (l >= 1) {
        // r_sig has order a + 2; contract the centers to leave a d x d slot.
        DenseTensor r_slot = r_sig;
        for (int s = 0; s < a; ++s) r_slot = contract_last(r_slot, p.centers[j]);
        Matrix G(d, d);
        for (int s = 0; s < d; ++s)
          for (int t = 0; t < d; ++t) G(s, t) = r_slot[static_cast<std::size_t>(s) * d + t];
        grad_V[j] += (c * pj * l) * (G + G.transpose()) * p.factors[j];
      }
    }
  }
}

}  // namespace dgmm
