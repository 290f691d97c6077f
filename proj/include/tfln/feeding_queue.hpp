#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "tfln/dataset.hpp"

namespace tfln {

/// Bounded blocking queue decoupling batch producers from the training
/// consumer. Safe for any number of concurrent producers and consumers.
/// close() is idempotent, wakes every waiter, and leaves buffered batches
/// drainable.
class FeedingQueue {
 public:
  enum class DequeueStatus { kOk, kTimeout, kClosed };

  explicit FeedingQueue(std::size_t capacity);

  /// Blocks while the queue is full. Returns false (batch dropped) if the
  /// queue is closed before space frees up.
  bool enqueue(Batch batch);

  /// Blocks until a batch arrives, the queue is closed and drained (kClosed),
  /// or the timeout elapses (kTimeout, retryable).
  DequeueStatus dequeue(Batch& out, std::chrono::milliseconds timeout);

  void close();
  bool closed() const;
  std::size_t buffered() const;
  std::size_t capacity() const { return capacity_; }

 private:
  const std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<Batch> buffer_;
  bool closed_ = false;
};

/// Joinable handle over the producer threads started by start_feeding.
class FeederHandle {
 public:
  FeederHandle() = default;
  FeederHandle(FeederHandle&&) = default;
  FeederHandle& operator=(FeederHandle&&) = default;
  ~FeederHandle() { join(); }

  void join();

 private:
  friend FeederHandle start_feeding(FeedingQueue& queue, BatchSource& source,
                                    std::size_t producer_count);
  std::vector<std::thread> threads_;
};

/// Launches producer_count threads that pull from `source` (serialized by an
/// internal lock) and enqueue into `queue` until the source is exhausted or
/// the queue closes. The queue and source must outlive the handle.
FeederHandle start_feeding(FeedingQueue& queue, BatchSource& source,
                           std::size_t producer_count);

/// Adapts a FeedingQueue to the BatchSource interface the training loop
/// consumes. Timeouts are retried; a closed-and-drained queue ends the
/// stream.
class QueueBatchSource : public BatchSource {
 public:
  explicit QueueBatchSource(FeedingQueue& queue,
                            std::chrono::milliseconds poll = std::chrono::milliseconds(100))
      : queue_(queue), poll_(poll) {}

  std::optional<Batch> next() override;

 private:
  FeedingQueue& queue_;
  std::chrono::milliseconds poll_;
};

}  // namespace tfln
