#include "tfln/feeding_queue.hpp"

#include "tfln/error.hpp"

namespace tfln {

FeedingQueue::FeedingQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) {
    throw ValidationError("feeding queue: capacity must be >= 1");
  }
}

bool FeedingQueue::enqueue(Batch batch) {
  std::unique_lock lock(mutex_);
  not_full_.wait(lock, [&] { return buffer_.size() < capacity_ || closed_; });
  if (closed_) return false;
  buffer_.push_back(std::move(batch));
  lock.unlock();
  not_empty_.notify_one();
  return true;
}

FeedingQueue::DequeueStatus FeedingQueue::dequeue(Batch& out,
                                                  std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  // system_clock deadline: maps to pthread_cond_timedwait.
  const auto deadline = std::chrono::system_clock::now() + timeout;
  const bool ready = not_empty_.wait_until(
      lock, deadline, [&] { return !buffer_.empty() || closed_; });
  if (!buffer_.empty()) {
    out = std::move(buffer_.front());
    buffer_.pop_front();
    lock.unlock();
    not_full_.notify_one();
    return DequeueStatus::kOk;
  }
  return ready ? DequeueStatus::kClosed : DequeueStatus::kTimeout;
}

void FeedingQueue::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  not_full_.notify_all();
  not_empty_.notify_all();
}

bool FeedingQueue::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t FeedingQueue::buffered() const {
  std::lock_guard lock(mutex_);
  return buffer_.size();
}

void FeederHandle::join() {
  for (std::thread& t : threads_) {
    if (t.joinable()) t.join();
  }
  threads_.clear();
}

std::optional<Batch> QueueBatchSource::next() {
  Batch batch;
  for (;;) {
    switch (queue_.dequeue(batch, poll_)) {
      case FeedingQueue::DequeueStatus::kOk:
        return batch;
      case FeedingQueue::DequeueStatus::kClosed:
        return std::nullopt;
      case FeedingQueue::DequeueStatus::kTimeout:
        continue;
    }
  }
}

FeederHandle start_feeding(FeedingQueue& queue, BatchSource& source,
                           std::size_t producer_count) {
  if (producer_count == 0) {
    throw ValidationError("start_feeding: producer_count must be >= 1");
  }
  if (queue.closed()) {
    throw StateError("start_feeding: queue is closed");
  }
  // Producers share one source; a dedicated lock serializes next() so the
  // stream stays exactly-once even with several producers.
  auto source_lock = std::make_shared<std::mutex>();
  FeederHandle handle;
  for (std::size_t i = 0; i < producer_count; ++i) {
    handle.threads_.emplace_back([&queue, &source, source_lock] {
      for (;;) {
        std::optional<Batch> batch;
        {
          std::lock_guard lock(*source_lock);
          batch = source.next();
        }
        if (!batch) break;
        if (!queue.enqueue(std::move(*batch))) break;
      }
    });
  }
  return handle;
}

}  // namespace tfln
