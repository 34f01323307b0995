#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace fase {

// One integer frequency k in M_N^d.
using FreqVec = std::vector<int>;

struct HalfLookup {
    std::size_t index;  // position in half_points()
    bool negated;       // true when -k (mod N) was matched instead of k
};

// Finite frequency domain M_N^d with M_N = {-ceil(N/2)+1, ..., floor(N/2)}
// and its canonical half domain M_{N,+}^d.
//
// Half-domain rule: k belongs to M_{N,+}^d iff k >=lex neg(k), where neg(k)
// is -k reduced mod N back into M_N. Equality means k is self-negating
// (every coordinate in {0, N/2} mod N); those points appear exactly once.
// For coordinates not fixed by negation this is the "first nonzero
// coordinate positive" rule. The ordering of half_points is the
// lexicographic enumeration of M_N^d filtered by membership, so it is
// deterministic given (d, N) and is the on-disk order for spectra files.
//
// Immutable after construction; safe to share across threads.
class FreqGrid {
public:
    FreqGrid(int dim, int n_side) : dim_(dim), n_side_(n_side) {
        if (dim < 1) throw std::invalid_argument("FreqGrid: dimension must be >= 1");
        if (n_side < 2) throw std::invalid_argument("FreqGrid: side length must be >= 2");
        std::size_t total = 1;
        for (int i = 0; i < dim; ++i) {
            if (total > (std::size_t{1} << 28) / static_cast<std::size_t>(n_side))
                throw std::invalid_argument("FreqGrid: domain too large");
            total *= static_cast<std::size_t>(n_side);
        }

        full_points_.reserve(total);
        lookup_.resize(total);

        const int lo = -((n_side + 1) / 2) + 1;  // -ceil(N/2)+1
        const int hi = n_side / 2;               // floor(N/2)

        FreqVec k(static_cast<std::size_t>(dim), lo);
        std::vector<std::size_t> half_slot(total, 0);
        for (;;) {
            full_points_.push_back(k);
            if (in_half(k)) {
                half_slot[bin_index(k)] = half_points_.size();
                half_points_.push_back(k);
                half_self_neg_.push_back(self_negating(k) ? 1 : 0);
            }
            int axis = dim - 1;
            while (axis >= 0 && k[static_cast<std::size_t>(axis)] == hi) {
                k[static_cast<std::size_t>(axis)] = lo;
                --axis;
            }
            if (axis < 0) break;
            ++k[static_cast<std::size_t>(axis)];
        }

        bin_of_half_.resize(half_points_.size());
        neg_bin_of_half_.resize(half_points_.size());
        for (std::size_t i = 0; i < half_points_.size(); ++i) {
            bin_of_half_[i] = bin_index(half_points_[i]);
            neg_bin_of_half_[i] = bin_index(negate_mod(half_points_[i]));
        }
        for (const auto& p : full_points_) {
            const std::size_t b = bin_index(p);
            if (in_half(p)) {
                lookup_[b] = HalfLookup{half_slot[b], false};
            } else {
                lookup_[b] = HalfLookup{half_slot[bin_index(negate_mod(p))], true};
            }
        }
    }

    int dim() const { return dim_; }
    int n_side() const { return n_side_; }
    std::size_t full_size() const { return full_points_.size(); }
    std::size_t half_size() const { return half_points_.size(); }

    const std::vector<FreqVec>& full_points() const { return full_points_; }
    const std::vector<FreqVec>& half_points() const { return half_points_; }

    // Row-major index of k reduced mod N into [0, N)^d; axis 0 is slowest.
    std::size_t bin_index(const FreqVec& k) const {
        check_point(k);
        std::size_t b = 0;
        for (int a = 0; a < dim_; ++a) {
            const int r = ((k[static_cast<std::size_t>(a)] % n_side_) + n_side_) % n_side_;
            b = b * static_cast<std::size_t>(n_side_) + static_cast<std::size_t>(r);
        }
        return b;
    }

    HalfLookup half_index(const FreqVec& k) const { return lookup_[bin_index(k)]; }

    std::size_t bin_of_half(std::size_t i) const { return bin_of_half_[i]; }
    std::size_t neg_bin_of_half(std::size_t i) const { return neg_bin_of_half_[i]; }
    std::size_t half_of_bin(std::size_t bin) const { return lookup_[bin].index; }

    // k == -k (mod N) componentwise, i.e. k in (N/2)Z^d.
    bool self_negating(const FreqVec& k) const {
        check_point(k);
        for (int v : k) {
            const int r = ((v % n_side_) + n_side_) % n_side_;
            if (r != 0 && 2 * r != n_side_) return false;
        }
        return true;
    }

    bool half_point_self_negating(std::size_t i) const { return half_self_neg_[i] != 0; }

    std::size_t self_negating_count() const {
        std::size_t c = 0;
        for (char f : half_self_neg_) c += static_cast<std::size_t>(f);
        return c;
    }

    bool in_half(const FreqVec& k) const {
        check_point(k);
        const FreqVec n = negate_mod(k);
        return !(k < n);  // lexicographic
    }

    // Lemma-2 weight: 2 when k1 = k2 is self-negating, 1 when k1 = k2
    // otherwise, 0 when k1 != k2. Both arguments must lie in M_{N,+}^d.
    int delta(const FreqVec& k1, const FreqVec& k2) const {
        if (!in_half(k1) || !in_half(k2))
            throw std::invalid_argument("delta: frequency outside half domain");
        if (k1 != k2) return 0;
        return self_negating(k1) ? 2 : 1;
    }

    // Continuous frequency k/N for a half-domain point.
    std::vector<double> frequency(std::size_t half_idx) const {
        std::vector<double> xi(static_cast<std::size_t>(dim_));
        for (int a = 0; a < dim_; ++a)
            xi[static_cast<std::size_t>(a)] =
                static_cast<double>(half_points_[half_idx][static_cast<std::size_t>(a)]) / n_side_;
        return xi;
    }

    FreqVec negate_mod(const FreqVec& k) const {
        check_point(k);
        const int lo = -((n_side_ + 1) / 2) + 1;
        const int hi = n_side_ / 2;
        FreqVec out(k.size());
        for (std::size_t i = 0; i < k.size(); ++i) {
            int v = -k[i];
            while (v > hi) v -= n_side_;
            while (v < lo) v += n_side_;
            out[i] = v;
        }
        return out;
    }

private:
    void check_point(const FreqVec& k) const {
        if (static_cast<int>(k.size()) != dim_)
            throw std::invalid_argument("FreqGrid: frequency vector has wrong dimension");
        const int lo = -((n_side_ + 1) / 2) + 1;
        const int hi = n_side_ / 2;
        for (int v : k)
            if (v < lo || v > hi)
                throw std::invalid_argument("FreqGrid: frequency outside M_N^d");
    }

    int dim_;
    int n_side_;
    std::vector<FreqVec> full_points_;
    std::vector<FreqVec> half_points_;
    std::vector<char> half_self_neg_;
    std::vector<HalfLookup> lookup_;          // by bin index
    std::vector<std::size_t> bin_of_half_;
    std::vector<std::size_t> neg_bin_of_half_;
};

using GridPtr = std::shared_ptr<const FreqGrid>;

inline FreqGrid build_grid(int dim, int n_side) { return FreqGrid(dim, n_side); }

inline GridPtr make_grid(int dim, int n_side) {
    return std::make_shared<const FreqGrid>(dim, n_side);
}

inline bool same_grid(const FreqGrid& a, const FreqGrid& b) {
    return a.dim() == b.dim() && a.n_side() == b.n_side();
}

}  // namespace fase
