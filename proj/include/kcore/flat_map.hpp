#pragma once

#include <cstdint>
#include <vector>

namespace kcore {

// Open-addressing int64 -> int64 map with O(1) epoch-based reset; the hot
// per-replicate loops reset one of these instead of sweeping buckets.
class FlatIndexMap {
public:
    void reset(std::size_t expected) {
        std::size_t want = 16;
        while (want < 4 * expected) want <<= 1;
        if (want > keys_.size()) {
            keys_.assign(want, 0);
            vals_.assign(want, 0);
            stamp_.assign(want, 0);
            epoch_ = 1;
        } else {
            ++epoch_;
        }
        mask_ = keys_.size() - 1;
        live_.clear();
    }

    std::int64_t get_or(std::int64_t key, std::int64_t fallback) const {
        std::size_t i = hash(key);
        while (stamp_[i] == epoch_) {
            if (keys_[i] == key) return vals_[i];
            i = (i + 1) & mask_;
        }
        return fallback;
    }

    void put(std::int64_t key, std::int64_t value) {
        std::size_t i = slot(key);
        vals_[i] = value;
    }

    std::int64_t increment(std::int64_t key) { return ++vals_[slot(key)]; }

    // Visits (key, value) of every entry inserted since the last reset.
    template <typename Fn>
    void for_each(Fn&& fn) const {
        for (std::size_t i : live_) fn(keys_[i], vals_[i]);
    }

private:
    std::size_t slot(std::int64_t key) {
        std::size_t i = hash(key);
        while (stamp_[i] == epoch_ && keys_[i] != key) i = (i + 1) & mask_;
        if (stamp_[i] != epoch_) {
            stamp_[i] = epoch_;
            keys_[i] = key;
            vals_[i] = 0;
            live_.push_back(i);
        }
        return i;
    }
    std::size_t hash(std::int64_t key) const {
        auto x = std::uint64_t(key) * 0x9e3779b97f4a7c15ULL;
        return std::size_t(x >> 32) & mask_;
    }

    std::vector<std::int64_t> keys_, vals_;
    std::vector<std::uint32_t> stamp_;
    std::vector<std::size_t> live_;
    std::size_t mask_ = 0;
    std::uint32_t epoch_ = 0;
};

}  // namespace kcore
