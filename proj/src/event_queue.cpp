#include "asyncfv/event_queue.hpp"

#include <stdexcept>
#include <string>

namespace asyncfv {

IndexedMinQueue::IndexedMinQueue(std::span<const double> keys)
    : keys_(keys.begin(), keys.end()), heap_(keys.size()), pos_(keys.size()) {
    if (keys.size() >= kAbsent) {
        throw std::length_error("IndexedMinQueue: too many entries");
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
        place(i, static_cast<Id>(i));
    }
    for (std::size_t i = heap_.size() / 2; i-- > 0;) {
        sift_down(i);
    }
}

double IndexedMinQueue::key(Id id) const {
    if (!contains(id)) {
        throw std::out_of_range("IndexedMinQueue: id " + std::to_string(id) + " not present");
    }
    return keys_[id];
}

std::pair<IndexedMinQueue::Id, double> IndexedMinQueue::top() const {
    if (heap_.empty()) {
        throw std::out_of_range("IndexedMinQueue: top of empty queue");
    }
    return {heap_[0], keys_[heap_[0]]};
}

std::pair<IndexedMinQueue::Id, double> IndexedMinQueue::pop_min() {
    auto result = top();
    const Id last = heap_.back();
    heap_.pop_back();
    pos_[result.first] = kAbsent;
    if (!heap_.empty()) {
        place(0, last);
        sift_down(0);
    }
    return result;
}

void IndexedMinQueue::update_key(Id id, double key) {
    if (!contains(id)) {
        throw std::out_of_range("IndexedMinQueue: update of absent id " + std::to_string(id));
    }
    const double old = keys_[id];
    keys_[id] = key;
    if (key < old) {
        sift_up(pos_[id]);
    } else if (key > old) {
        sift_down(pos_[id]);
    }
}

void IndexedMinQueue::push(Id id, double key) {
    if (id >= pos_.size()) {
        pos_.resize(id + 1, kAbsent);
        keys_.resize(id + 1, 0.0);
    }
    if (pos_[id] != kAbsent) {
        throw std::invalid_argument("IndexedMinQueue: id " + std::to_string(id) + " already present");
    }
    keys_[id] = key;
    heap_.push_back(id);
    pos_[id] = static_cast<std::uint32_t>(heap_.size() - 1);
    sift_up(heap_.size() - 1);
}

void IndexedMinQueue::sift_up(std::size_t slot) {
    const Id id = heap_[slot];
    while (slot > 0) {
        const std::size_t parent = (slot - 1) / 2;
        if (!less(id, heap_[parent])) {
            break;
        }
        place(slot, heap_[parent]);
        slot = parent;
    }
    place(slot, id);
}

void IndexedMinQueue::sift_down(std::size_t slot) {
    const Id id = heap_[slot];
    const std::size_t n = heap_.size();
    for (;;) {
        std::size_t child = 2 * slot + 1;
        if (child >= n) {
            break;
        }
        if (child + 1 < n && less(heap_[child + 1], heap_[child])) {
            ++child;
        }
        if (!less(heap_[child], id)) {
            break;
        }
        place(slot, heap_[child]);
        slot = child;
    }
    place(slot, id);
}

bool IndexedMinQueue::audit() const {
    std::size_t present = 0;
    for (std::size_t id = 0; id < pos_.size(); ++id) {
        if (pos_[id] == kAbsent) {
            continue;
        }
        ++present;
        if (pos_[id] >= heap_.size() || heap_[pos_[id]] != id) {
            return false;
        }
    }
    if (present != heap_.size()) {
        return false;
    }
    for (std::size_t s = 1; s < heap_.size(); ++s) {
        if (less(heap_[s], heap_[(s - 1) / 2])) {
            return false;
        }
    }
    return true;
}

}  // namespace asyncfv
