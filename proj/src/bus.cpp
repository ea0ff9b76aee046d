#include "adaflow/bus.hpp"

namespace adaflow {

void MessageBus::declare_queue(const std::string& name) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!queues_.count(name)) queues_[name] = std::make_unique<Queue>();
}

bool MessageBus::has_queue(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mu_);
  return queues_.count(name) != 0;
}

MessageBus::Queue& MessageBus::queue_ref_locked(const std::string& name) {
  auto it = queues_.find(name);
  if (it == queues_.end()) throw BusError("unknown queue: " + name);
  return *it->second;
}

const MessageBus::Queue* MessageBus::queue_ptr_locked(
    const std::string& name) const {
  auto it = queues_.find(name);
  return it == queues_.end() ? nullptr : it->second.get();
}

std::uint64_t MessageBus::publish(const std::string& queue,
                                  std::string payload) {
  std::unique_lock<std::mutex> lock(mu_);
  Queue& q = queue_ref_locked(queue);
  q.writable.wait(lock, [&] {
    return closed_ || q.ready.size() < high_water_mark_;
  });
  if (closed_) throw BusError("bus is shut down");
  Envelope env;
  env.id = next_id_++;
  env.queue = queue;
  env.payload = std::move(payload);
  const std::uint64_t id = env.id;
  q.issued.insert(id);
  q.ready.push_back(std::move(env));
  q.consumable.notify_one();
  return id;
}

std::optional<Envelope> MessageBus::consume(const std::string& queue,
                                            std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(mu_);
  Queue& q = queue_ref_locked(queue);
  if (!q.consumable.wait_for(lock, timeout,
                             [&] { return closed_ || !q.ready.empty(); }))
    return std::nullopt;
  if (q.ready.empty()) return std::nullopt;  // woken by shutdown
  Envelope env = std::move(q.ready.front());
  q.ready.pop_front();
  ++env.delivery_count;
  q.inflight[env.id] = env;
  q.writable.notify_one();
  return env;
}

void MessageBus::ack(const std::string& queue, std::uint64_t id) {
  std::lock_guard<std::mutex> lock(mu_);
  Queue& q = queue_ref_locked(queue);
  auto it = q.inflight.find(id);
  if (it != q.inflight.end()) {
    q.acked.insert(id);
    q.inflight.erase(it);
    return;
  }
  if (q.acked.count(id)) return;  // duplicate ack after redelivery race
  if (q.issued.count(id)) {
    // Late ack for a message that was requeued meanwhile: the work is done,
    // so retire the ready copy instead of redelivering it.
    for (auto r = q.ready.begin(); r != q.ready.end(); ++r) {
      if (r->id == id) {
        q.ready.erase(r);
        q.writable.notify_one();
        break;
      }
    }
    q.acked.insert(id);
    return;
  }
  throw BusError("ack of unknown message id " + std::to_string(id) +
                 " on queue " + queue);
}

std::size_t MessageBus::requeue_unacked(const std::string& queue) {
  std::lock_guard<std::mutex> lock(mu_);
  Queue& q = queue_ref_locked(queue);
  // inflight is keyed by id and ids are monotonic, so iterating in key order
  // restores the original relative order at the front of the queue.
  std::size_t n = q.inflight.size();
  for (auto it = q.inflight.rbegin(); it != q.inflight.rend(); ++it)
    q.ready.push_front(it->second);
  q.inflight.clear();
  if (n) q.consumable.notify_all();
  return n;
}

std::size_t MessageBus::pending(const std::string& queue) const {
  std::lock_guard<std::mutex> lock(mu_);
  const Queue* q = queue_ptr_locked(queue);
  return q ? q->ready.size() : 0;
}

std::size_t MessageBus::in_flight(const std::string& queue) const {
  std::lock_guard<std::mutex> lock(mu_);
  const Queue* q = queue_ptr_locked(queue);
  return q ? q->inflight.size() : 0;
}

void MessageBus::shutdown() {
  std::lock_guard<std::mutex> lock(mu_);
  closed_ = true;
  for (auto& [name, q] : queues_) {
    q->consumable.notify_all();
    q->writable.notify_all();
  }
}

}  // namespace adaflow
