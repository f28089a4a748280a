#include "msyn/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "msyn/error.hpp"

namespace msyn {

// ----------------------------------------------------------------------------
// LayerStack

LayerStack::LayerStack(Vector lower, Vector upper, Vector eta1, double tau1, int layers)
    : lower_(std::move(lower)),
      upper_(std::move(upper)),
      eta1_(std::move(eta1)),
      tau1_(tau1),
      layers_(layers) {
  const std::size_t n = lower_.size();
  if (n == 0) throw ContractViolation("layer stack: dimension must be positive");
  if (upper_.size() != n || eta1_.size() != n)
    throw ContractViolation("layer stack: bounds and eta1 differ in dimension");
  if (layers_ < 1) throw ContractViolation("layer stack: need at least one layer");
  if (layers_ > 24) throw ContractViolation("layer stack: too many layers");
  if (!(tau1_ > 0.0)) throw ContractViolation("layer stack: tau1 must be positive");
  extent_.resize(static_cast<std::size_t>(layers_));
  count_.resize(static_cast<std::size_t>(layers_));
  const double coarse = std::ldexp(1.0, layers_ - 1);
  std::vector<std::uint32_t> top(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eta1_[i] > 0.0)) throw ContractViolation("layer stack: eta1 must be positive");
    const double width = upper_[i] - lower_[i];
    if (!(width > 0.0)) throw ContractViolation("layer stack: empty region of interest");
    const double ratio = width / (coarse * eta1_[i]);
    const double k = std::round(ratio);
    if (k < 1.0 || std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio))
      throw ContractViolation("layer stack: region width in dimension " + std::to_string(i) +
                              " is not an integer multiple of 2^(L-1)*eta1");
    top[i] = static_cast<std::uint32_t>(k);
  }
  for (int l = layers_; l >= 1; --l) {
    auto& ext = extent_[static_cast<std::size_t>(l - 1)];
    ext.resize(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
      ext[i] = top[i] << (layers_ - l);
      total *= ext[i];
    }
    if (total > (std::size_t{1} << 32))
      throw ContractViolation("layer stack: layer " + std::to_string(l) + " has too many cells");
    count_[static_cast<std::size_t>(l - 1)] = total;
  }
}

void LayerStack::check_layer(int layer) const {
  if (layer < 1 || layer > layers_)
    throw ContractViolation("layer " + std::to_string(layer) + " outside [1;" +
                            std::to_string(layers_) + "]");
}

double LayerStack::tau(int layer) const {
  check_layer(layer);
  return std::ldexp(tau1_, layer - 1);
}

Vector LayerStack::eta(int layer) const {
  check_layer(layer);
  Vector e(eta1_);
  for (double& v : e) v = std::ldexp(v, layer - 1);
  return e;
}

const std::vector<std::uint32_t>& LayerStack::extent(int layer) const {
  check_layer(layer);
  return extent_[static_cast<std::size_t>(layer - 1)];
}

std::size_t LayerStack::cell_count(int layer) const {
  check_layer(layer);
  return count_[static_cast<std::size_t>(layer - 1)];
}

std::size_t LayerStack::linearize(int layer, std::span<const std::uint32_t> index) const {
  const auto& ext = extent(layer);
  if (index.size() != ext.size()) throw ContractViolation("cell index has wrong dimension");
  std::size_t lin = 0;
  for (std::size_t i = ext.size(); i-- > 0;) {
    if (index[i] >= ext[i]) throw ContractViolation("cell index out of bounds");
    lin = lin * ext[i] + index[i];
  }
  return lin;
}

std::vector<std::uint32_t> LayerStack::unravel(int layer, std::size_t cell) const {
  const auto& ext = extent(layer);
  if (cell >= cell_count(layer)) throw ContractViolation("cell out of bounds");
  std::vector<std::uint32_t> idx(ext.size());
  for (std::size_t i = 0; i < ext.size(); ++i) {
    idx[i] = static_cast<std::uint32_t>(cell % ext[i]);
    cell /= ext[i];
  }
  return idx;
}

std::optional<std::size_t> LayerStack::quantize(std::span<const double> x, int layer) const {
  const auto& ext = extent(layer);
  if (x.size() != dim()) throw ContractViolation("quantize: state has wrong dimension");
  std::size_t lin = 0;
  std::size_t stride = 1;
  for (std::size_t i = 0; i < ext.size(); ++i) {
    if (!(x[i] >= lower_[i]) || !(x[i] < upper_[i])) return std::nullopt;
    const double eta = std::ldexp(eta1_[i], layer - 1);
    auto k = static_cast<std::size_t>(std::floor((x[i] - lower_[i]) / eta));
    if (k >= ext[i]) k = ext[i] - 1;
    lin += k * stride;
    stride *= ext[i];
  }
  return lin;
}

ReachBox LayerStack::cell_box(int layer, std::size_t cell) const {
  const auto idx = unravel(layer, cell);
  ReachBox box{Vector(dim()), Vector(dim())};
  for (std::size_t i = 0; i < dim(); ++i) {
    const double eta = std::ldexp(eta1_[i], layer - 1);
    box.lower[i] = lower_[i] + idx[i] * eta;
    box.upper[i] = idx[i] + 1 == extent(layer)[i] ? upper_[i] : lower_[i] + (idx[i] + 1) * eta;
  }
  return box;
}

Vector LayerStack::cell_center(int layer, std::size_t cell) const { return cell_box(layer, cell).center(); }

std::size_t LayerStack::parent(int fine, std::size_t cell, int coarse) const {
  if (fine > coarse) throw ContractViolation("parent: source layer is coarser than target");
  const auto idx = unravel(fine, cell);
  const auto& ext = extent(coarse);
  std::size_t lin = 0;
  for (std::size_t i = ext.size(); i-- > 0;) lin = lin * ext[i] + (idx[i] >> (coarse - fine));
  return lin;
}

bool LayerStack::inside_region(const ReachBox& box) const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (box.lower[i] < lower_[i] || box.upper[i] > upper_[i]) return false;
  return true;
}

std::optional<CellId> quantize(const LayerStack& stack, std::span<const double> x, int layer) {
  const auto lin = stack.quantize(x, layer);
  if (!lin) return std::nullopt;
  return CellId{layer, stack.unravel(layer, *lin)};
}

ReachBox cell_box(const LayerStack& stack, const CellId& id) {
  return stack.cell_box(id.layer, stack.linearize(id.layer, id.index));
}

// ----------------------------------------------------------------------------
// CellSet

CellSet::CellSet(int layer, std::size_t size)
    : layer_(layer), size_(size), words_((size + 63) / 64, 0) {}

CellSet CellSet::full(int layer, std::size_t size) {
  CellSet s(layer, size);
  for (auto& w : s.words_) w = ~std::uint64_t{0};
  s.trim();
  return s;
}

void CellSet::trim() {
  if (size_ % 64 != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << (size_ % 64)) - 1;
}

void CellSet::check_same(const CellSet& other) const {
  if (layer_ != other.layer_ || size_ != other.size_)
    throw ContractViolation("cell set operands belong to different layers (" +
                            std::to_string(layer_) + " vs " + std::to_string(other.layer_) + ")");
}

std::size_t CellSet::count() const {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

bool CellSet::empty() const {
  for (auto w : words_)
    if (w) return false;
  return true;
}

bool CellSet::is_subset_of(const CellSet& other) const {
  check_same(other);
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (words_[i] & ~other.words_[i]) return false;
  return true;
}

bool CellSet::intersects(const CellSet& other) const {
  check_same(other);
  for (std::size_t i = 0; i < words_.size(); ++i)
    if (words_[i] & other.words_[i]) return true;
  return false;
}

void CellSet::clear() {
  for (auto& w : words_) w = 0;
}

CellSet& CellSet::operator|=(const CellSet& other) {
  check_same(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
  return *this;
}

CellSet& CellSet::operator&=(const CellSet& other) {
  check_same(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= other.words_[i];
  return *this;
}

CellSet& CellSet::operator-=(const CellSet& other) {
  check_same(other);
  for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~other.words_[i];
  return *this;
}

std::vector<std::size_t> CellSet::to_vector() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for_each([&](std::size_t c) { out.push_back(c); });
  return out;
}

CellSet set_union(const CellSet& a, const CellSet& b) { return a | b; }
CellSet set_intersect(const CellSet& a, const CellSet& b) { return a & b; }
CellSet set_difference(const CellSet& a, const CellSet& b) { return a - b; }

// ----------------------------------------------------------------------------
// Gamma operators

namespace {

// Visits every cell of `fine` together with its parent in `coarse`.
template <class F>
void for_each_with_parent(const LayerStack& stack, int fine, int coarse, F&& f) {
  const auto& ext = stack.extent(fine);
  const auto& cext = stack.extent(coarse);
  const int shift = coarse - fine;
  const std::size_t n = ext.size();
  std::vector<std::size_t> cstride(n);
  std::size_t s = 1;
  for (std::size_t i = 0; i < n; ++i) {
    cstride[i] = s;
    s *= cext[i];
  }
  std::vector<std::uint32_t> idx(n, 0);
  std::size_t parent = 0;
  const std::size_t total = stack.cell_count(fine);
  for (std::size_t cell = 0; cell < total; ++cell) {
    f(cell, parent);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t old_c = idx[i] >> shift;
      if (++idx[i] < ext[i]) {
        const std::uint32_t new_c = idx[i] >> shift;
        parent += (new_c - old_c) * cstride[i];
        break;
      }
      parent -= old_c * cstride[i];
      idx[i] = 0;
    }
  }
}

CellSet refine(const LayerStack& stack, const CellSet& src, int target) {
  CellSet out = CellSet::of(stack, target);
  for_each_with_parent(stack, target, src.layer(), [&](std::size_t cell, std::size_t parent) {
    if (src.contains(parent)) out.insert(cell);
  });
  return out;
}

CellSet coarsen(const LayerStack& stack, const CellSet& src, int target, bool all) {
  CellSet out = CellSet::of(stack, target);
  if (all) {
    std::vector<std::uint32_t> hits(stack.cell_count(target), 0);
    for_each_with_parent(stack, src.layer(), target, [&](std::size_t cell, std::size_t parent) {
      if (src.contains(cell)) ++hits[parent];
    });
    const std::uint32_t per = std::uint32_t{1}
                              << (static_cast<int>(stack.dim()) * (target - src.layer()));
    for (std::size_t c = 0; c < hits.size(); ++c)
      if (hits[c] == per) out.insert(c);
  } else {
    for_each_with_parent(stack, src.layer(), target, [&](std::size_t cell, std::size_t parent) {
      if (src.contains(cell)) out.insert(parent);
    });
  }
  return out;
}

void check_gamma(const LayerStack& stack, const CellSet& src, int target) {
  stack.check_layer(target);
  stack.check_layer(src.layer());
  if (src.size() != stack.cell_count(src.layer()))
    throw ContractViolation("gamma: cell set does not match the layer stack");
}

}  // namespace

CellSet gamma_down(const LayerStack& stack, const CellSet& src, int target_layer) {
  check_gamma(stack, src, target_layer);
  if (target_layer == src.layer()) return src;
  if (target_layer < src.layer()) return refine(stack, src, target_layer);
  return coarsen(stack, src, target_layer, true);
}

CellSet gamma_up(const LayerStack& stack, const CellSet& src, int target_layer) {
  check_gamma(stack, src, target_layer);
  if (target_layer == src.layer()) return src;
  if (target_layer < src.layer()) return refine(stack, src, target_layer);
  return coarsen(stack, src, target_layer, false);
}

// ----------------------------------------------------------------------------
// Geometry

namespace {

bool point_in(const ReachBox& b, std::span<const double> x) { return b.contains(x); }

}  // namespace

bool ProblemGeometry::in_safe(const LayerStack& stack, std::span<const double> x) const {
  if (!stack.quantize(x, 1)) return false;
  if (!safe.empty()) {
    bool any = false;
    for (const auto& b : safe) any = any || point_in(b, x);
    if (!any) return false;
  }
  for (const auto& o : obstacles)
    if (point_in(o, x)) return false;
  return true;
}

bool ProblemGeometry::in_target(const LayerStack& stack, std::span<const double> x) const {
  if (!in_safe(stack, x)) return false;
  for (const auto& t : targets)
    if (point_in(t, x)) return true;
  return false;
}

CellSet cells_inside(const LayerStack& stack, int layer, const std::vector<ReachBox>& boxes) {
  CellSet out = CellSet::of(stack, layer);
  const Vector eta = stack.eta(layer);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const ReachBox cell = stack.cell_box(layer, c);
    for (const auto& b : boxes) {
      bool inside = true;
      for (std::size_t i = 0; i < stack.dim() && inside; ++i) {
        const double tol = 1e-9 * eta[i];
        inside = cell.lower[i] >= b.lower[i] - tol && cell.upper[i] <= b.upper[i] + tol;
      }
      if (inside) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

CellSet cells_meeting(const LayerStack& stack, int layer, const std::vector<ReachBox>& boxes) {
  CellSet out = CellSet::of(stack, layer);
  const Vector eta = stack.eta(layer);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const ReachBox cell = stack.cell_box(layer, c);
    for (const auto& b : boxes) {
      bool meets = true;
      for (std::size_t i = 0; i < stack.dim() && meets; ++i) {
        const double tol = 1e-9 * eta[i];
        meets = cell.lower[i] <= b.upper[i] + tol && cell.upper[i] > b.lower[i] + tol;
      }
      if (meets) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

void write_csv(std::ostream& out, const LayerStack& stack, const CellSet& cells) {
  out << "layer";
  for (std::size_t i = 0; i < stack.dim(); ++i) out << ",i" << i;
  for (std::size_t i = 0; i < stack.dim(); ++i) out << ",c" << i;
  out << '\n';
  char buf[64];
  cells.for_each([&](std::size_t c) {
    out << cells.layer();
    for (auto k : stack.unravel(cells.layer(), c)) out << ',' << k;
    for (double v : stack.cell_center(cells.layer(), c)) {
      std::snprintf(buf, sizeof buf, ",%.10g", v);
      out << buf;
    }
    out << '\n';
  });
}

}  // namespace msyn
