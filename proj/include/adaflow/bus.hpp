#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "adaflow/common.hpp"

namespace adaflow {

struct Envelope {
  std::uint64_t id = 0;        // bus-assigned, unique per bus instance
  std::string queue;
  std::string payload;         // JSON text by convention
  std::uint32_t delivery_count = 0;  // 1 on first delivery
};

/// In-process message bus with named queues.
///
/// Delivery contract: at-least-once. A consumed message stays in an in-flight
/// table until acked; requeue_unacked() puts in-flight messages back at the
/// front of their queue (redeliveries may therefore overtake later messages,
/// and handlers must be idempotent). First deliveries preserve publish order.
///
/// publish() blocks while a queue sits at its high-water mark; this is the
/// only backpressure mechanism, there is no drop path.
class MessageBus {
 public:
  explicit MessageBus(std::size_t high_water_mark = 4096)
      : high_water_mark_(high_water_mark) {}

  void declare_queue(const std::string& name);
  bool has_queue(const std::string& name) const;

  /// Blocks while `queue` holds high_water_mark ready messages.
  std::uint64_t publish(const std::string& queue, std::string payload);

  /// Waits up to timeout for a message; nullopt on timeout. Zero timeout
  /// polls. The message becomes in-flight and must be acked or requeued.
  std::optional<Envelope> consume(const std::string& queue,
                                  std::chrono::milliseconds timeout);

  /// Acks an in-flight message. Acking an already-acked id is a no-op
  /// (consumers retry acks after crashes); acking an id this bus never
  /// assigned throws BusError.
  void ack(const std::string& queue, std::uint64_t id);

  /// Returns all in-flight messages of `queue` to the front of the queue,
  /// preserving their relative order. Used when a consumer dies.
  std::size_t requeue_unacked(const std::string& queue);

  std::size_t pending(const std::string& queue) const;    // ready, not in-flight
  std::size_t in_flight(const std::string& queue) const;

  /// Wakes all blocked consumers and makes further consume() return nullopt
  /// immediately. Publishing after shutdown throws.
  void shutdown();

 private:
  struct Queue {
    std::deque<Envelope> ready;
    std::map<std::uint64_t, Envelope> inflight;
    std::set<std::uint64_t> acked;   // ids that completed delivery
    std::set<std::uint64_t> issued;  // every id ever assigned to this queue
    std::condition_variable consumable;
    std::condition_variable writable;
  };

  Queue& queue_ref_locked(const std::string& name);
  const Queue* queue_ptr_locked(const std::string& name) const;

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Queue>> queues_;
  std::uint64_t next_id_ = 1;
  std::size_t high_water_mark_;
  bool closed_ = false;
};

}  // namespace adaflow
