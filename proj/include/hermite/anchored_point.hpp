#pragma once
#include <algorithm>
#include <cmath>
#include <compare>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hermite {

// Point of R^N that agrees with the anchor a outside finitely many coordinates.
class AnchoredPoint {
public:
  using Entry = std::pair<long, double>;

  explicit AnchoredPoint(double anchor = 0.0) : anchor_(anchor) {}
  AnchoredPoint(double anchor, std::vector<Entry> entries) : anchor_(anchor), active_(std::move(entries)) {
    std::sort(active_.begin(), active_.end(), [](const Entry& l, const Entry& r) { return l.first < r.first; });
    for (std::size_t i = 0; i < active_.size(); ++i) {
      if (active_[i].first < 1) throw std::invalid_argument("AnchoredPoint: indices must be positive");
      if (!std::isfinite(active_[i].second)) throw std::invalid_argument("AnchoredPoint: non-finite entry");
      if (i && active_[i].first == active_[i - 1].first)
        throw std::invalid_argument("AnchoredPoint: duplicate index");
    }
    std::erase_if(active_, [&](const Entry& e) { return e.second == anchor_; });
  }

  double anchor() const { return anchor_; }
  const std::vector<Entry>& active() const { return active_; }
  std::size_t act() const { return active_.size(); }

  double operator[](long j) const {
    auto it = std::lower_bound(active_.begin(), active_.end(), j,
                               [](const Entry& e, long k) { return e.first < k; });
    return (it != active_.end() && it->first == j) ? it->second : anchor_;
  }

  bool active_only_on(const std::vector<long>& u) const {
    for (const auto& e : active_)
      if (!std::binary_search(u.begin(), u.end(), e.first)) return false;
    return true;
  }

  friend bool operator==(const AnchoredPoint&, const AnchoredPoint&) = default;
  friend auto operator<=>(const AnchoredPoint& l, const AnchoredPoint& r) {
    if (auto c = l.anchor_ <=> r.anchor_; c != 0) return c;
    const std::size_t n = std::min(l.active_.size(), r.active_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (auto c = l.active_[i].first <=> r.active_[i].first; c != 0) return std::partial_ordering(c);
      if (auto c = l.active_[i].second <=> r.active_[i].second; c != 0) return c;
    }
    return std::partial_ordering(l.active_.size() <=> r.active_.size());
  }

private:
  double anchor_;
  std::vector<Entry> active_;
};

}  // namespace hermite
