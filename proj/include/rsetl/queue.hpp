// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>

namespace rsetl {

/// Bounded blocking multi-producer / single-consumer channel. Producers block
/// while the queue is full; the consumer blocks while it is empty. close()
/// releases everyone: push then fails and pop drains what is left.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

    BoundedQueue(const BoundedQueue&) = delete;
    BoundedQueue& operator=(const BoundedQueue&) = delete;

    /// False when the queue was closed before the item could be enqueued.
    bool push(T item) {
        std::unique_lock lock(mu_);
        not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
        if (closed_) return false;
        items_.push_back(std::move(item));
        max_occupancy_ = std::max(max_occupancy_, items_.size());
        ++pushed_;
        lock.unlock();
        not_empty_.notify_one();
        return true;
    }

    /// nullopt once the queue is closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mu_);
        not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        lock.unlock();
        not_full_.notify_one();
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        not_full_.notify_all();
        not_empty_.notify_all();
    }

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const {
        std::lock_guard lock(mu_);
        return items_.size();
    }
    std::size_t max_occupancy() const {
        std::lock_guard lock(mu_);
        return max_occupancy_;
    }
    std::size_t pushed() const {
        std::lock_guard lock(mu_);
        return pushed_;
    }

private:
    const std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable not_full_;
    std::condition_variable not_empty_;
    std::deque<T> items_;
    std::size_t max_occupancy_ = 0;
    std::size_t pushed_ = 0;
    bool closed_ = false;
};

} // namespace rsetl
