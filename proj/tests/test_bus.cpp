#include <doctest.h>

#include <atomic>
#include <chrono>
#include <set>
#include <string>
#include <thread>

#include "adaflow/bus.hpp"

using namespace adaflow;
using namespace std::chrono_literals;

TEST_CASE("bus delivers in publish order and tracks in-flight state") {
  MessageBus bus;
  bus.declare_queue("q");
  CHECK(bus.has_queue("q"));
  CHECK_FALSE(bus.has_queue("other"));

  for (int i = 0; i < 5; ++i) bus.publish("q", std::to_string(i));
  CHECK(bus.pending("q") == 5);

  for (int i = 0; i < 5; ++i) {
    auto env = bus.consume("q", 0ms);
    REQUIRE(env.has_value());
    CHECK(env->payload == std::to_string(i));
    CHECK(env->delivery_count == 1);
    bus.ack("q", env->id);
  }
  CHECK(bus.pending("q") == 0);
  CHECK(bus.in_flight("q") == 0);
  CHECK_FALSE(bus.consume("q", 0ms).has_value());
}

TEST_CASE("unacked messages requeue at the front with bumped delivery count") {
  MessageBus bus;
  bus.declare_queue("q");
  bus.publish("q", "a");
  bus.publish("q", "b");
  bus.publish("q", "c");

  auto a = bus.consume("q", 0ms);
  auto b = bus.consume("q", 0ms);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(bus.in_flight("q") == 2);

  // Consumer dies holding a and b; both return ahead of c, in order.
  CHECK(bus.requeue_unacked("q") == 2);
  CHECK(bus.in_flight("q") == 0);
  CHECK(bus.pending("q") == 3);

  auto a2 = bus.consume("q", 0ms);
  REQUIRE(a2);
  CHECK(a2->payload == "a");
  CHECK(a2->delivery_count == 2);
  CHECK(a2->id == a->id);
  auto b2 = bus.consume("q", 0ms);
  REQUIRE(b2);
  CHECK(b2->payload == "b");
  auto c = bus.consume("q", 0ms);
  REQUIRE(c);
  CHECK(c->payload == "c");
  CHECK(c->delivery_count == 1);
}

TEST_CASE("ack is idempotent for issued ids and rejects foreign ids") {
  MessageBus bus;
  bus.declare_queue("q");
  std::uint64_t id = bus.publish("q", "x");
  auto env = bus.consume("q", 0ms);
  REQUIRE(env);
  CHECK(env->id == id);

  bus.ack("q", id);
  bus.ack("q", id);  // retried ack after a crash: no-op
  CHECK_THROWS_AS(bus.ack("q", id + 999), BusError);
  CHECK_THROWS_AS(bus.publish("nope", "x"), BusError);
}

TEST_CASE("late requeue after ack does not resurrect the message") {
  MessageBus bus;
  bus.declare_queue("q");
  bus.publish("q", "only");
  auto env = bus.consume("q", 0ms);
  REQUIRE(env);
  bus.ack("q", env->id);
  CHECK(bus.requeue_unacked("q") == 0);
  CHECK(bus.pending("q") == 0);
}

TEST_CASE("publish blocks at the high-water mark until a consumer drains") {
  MessageBus bus(2);
  bus.declare_queue("q");
  bus.publish("q", "1");
  bus.publish("q", "2");

  std::atomic<bool> third_done{false};
  std::thread producer([&] {
    bus.publish("q", "3");  // blocks until something is consumed
    third_done = true;
  });
  std::this_thread::sleep_for(50ms);
  CHECK_FALSE(third_done.load());

  auto env = bus.consume("q", 1000ms);
  REQUIRE(env);
  bus.ack("q", env->id);
  producer.join();
  CHECK(third_done.load());
  CHECK(bus.pending("q") == 2);
}

TEST_CASE("consume timeout expires empty and shutdown wakes blocked readers") {
  MessageBus bus;
  bus.declare_queue("q");
  auto t0 = std::chrono::steady_clock::now();
  CHECK_FALSE(bus.consume("q", 30ms).has_value());
  CHECK(std::chrono::steady_clock::now() - t0 >= 25ms);

  std::thread reader([&] {
    CHECK_FALSE(bus.consume("q", 5000ms).has_value());  // woken by shutdown
  });
  std::this_thread::sleep_for(20ms);
  bus.shutdown();
  reader.join();
  CHECK_THROWS_AS(bus.publish("q", "late"), BusError);
}

TEST_CASE("queues are independent and ids are unique across them") {
  MessageBus bus;
  bus.declare_queue("a");
  bus.declare_queue("b");
  std::set<std::uint64_t> ids;
  for (int i = 0; i < 50; ++i) {
    ids.insert(bus.publish("a", "pa"));
    ids.insert(bus.publish("b", "pb"));
  }
  CHECK(ids.size() == 100);
  CHECK(bus.pending("a") == 50);
  CHECK(bus.pending("b") == 50);
}

TEST_CASE("bus sustains a hundred thousand messages through two consumers") {
  const int kMessages = 100000;
  MessageBus bus(512);
  bus.declare_queue("q");

  std::atomic<long> sum{0};
  std::atomic<int> seen{0};
  auto consumer = [&] {
    while (seen.load() < kMessages) {
      auto env = bus.consume("q", 10ms);
      if (!env) continue;
      sum += std::stol(env->payload);
      seen.fetch_add(1);
      bus.ack("q", env->id);
    }
  };
  std::thread c1(consumer), c2(consumer);
  long expect = 0;
  for (int i = 0; i < kMessages; ++i) {
    bus.publish("q", std::to_string(i));
    expect += i;
  }
  c1.join();
  c2.join();
  CHECK(sum.load() == expect);
  CHECK(bus.pending("q") == 0);
  CHECK(bus.in_flight("q") == 0);
}
