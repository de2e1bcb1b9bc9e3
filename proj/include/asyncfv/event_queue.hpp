#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace asyncfv {

/// Addressable binary min-heap over face ids keyed by projected update time.
/// Ordering is lexicographic on (key, id), so equal keys pop in id order.
class IndexedMinQueue {
public:
    using Id = std::uint32_t;
    static constexpr std::uint32_t kAbsent = 0xFFFFFFFFu;

    IndexedMinQueue() = default;

    /// Heapifies one entry per id in O(n); ids are 0..keys.size()-1.
    explicit IndexedMinQueue(std::span<const double> keys);

    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }
    std::size_t capacity() const { return pos_.size(); }

    bool contains(Id id) const { return id < pos_.size() && pos_[id] != kAbsent; }
    double key(Id id) const;

    /// Minimum (id, key); throws std::out_of_range if empty.
    std::pair<Id, double> top() const;
    std::pair<Id, double> pop_min();

    /// Re-keys a present id; throws std::out_of_range for unknown ids.
    void update_key(Id id, double key);

    /// Inserts an absent id; throws std::invalid_argument if already present.
    void push(Id id, double key);

    /// Verifies heap order and the id/slot bijection.
    bool audit() const;

private:
    bool less(Id a, Id b) const { return keys_[a] < keys_[b] || (keys_[a] == keys_[b] && a < b); }
    void sift_up(std::size_t slot);
    void sift_down(std::size_t slot);
    void place(std::size_t slot, Id id) {
        heap_[slot] = id;
        pos_[id] = static_cast<std::uint32_t>(slot);
    }

    std::vector<double> keys_;
    std::vector<Id> heap_;
    std::vector<std::uint32_t> pos_;
};

}  // namespace asyncfv
