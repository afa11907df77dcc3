#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"

using namespace jcall;

namespace {

struct Recorder : PacketSink {
  std::vector<Datagram> got;
  void on_datagram(const Datagram& d) override { got.push_back(d); }
};

struct TapRecorder : WireTap {
  struct Entry {
    Micros at;
    std::string payload;
    WireDisposition disp;
    std::string note;
  };
  std::vector<Entry> entries;
  void on_wire(Micros at, const Datagram& d, WireDisposition disp,
               const std::string& note) override {
    entries.push_back({at, d.payload, disp, note});
  }
};

}  // namespace

TEST_CASE("virtual engine dispatches by due time then insertion order") {
  Engine eng(ClockMode::Virtual);
  std::vector<int> order;
  std::vector<Micros> at;
  eng.schedule_after(millis(10), [&] {
    order.push_back(1);
    at.push_back(eng.now());
  });
  eng.schedule_after(millis(5), [&] {
    order.push_back(2);
    at.push_back(eng.now());
  });
  eng.schedule_after(millis(5), [&] {
    order.push_back(3);
    at.push_back(eng.now());
  });
  eng.run();
  CHECK(order == std::vector<int>{2, 3, 1});
  CHECK(at == std::vector<Micros>{millis(5), millis(5), millis(10)});
  CHECK(eng.now() == millis(10));
}

TEST_CASE("cancelled timers never fire and never advance the clock") {
  Engine eng(ClockMode::Virtual);
  bool fired = false;
  auto id = eng.schedule_after(millis(50), [&] { fired = true; });
  eng.schedule_after(millis(10), [&] {});
  eng.cancel(id);
  eng.run();
  CHECK_FALSE(fired);
  CHECK(eng.now() == millis(10));
}

TEST_CASE("run_until stops at the deadline and leaves later work queued") {
  Engine eng(ClockMode::Virtual);
  int fired = 0;
  eng.schedule_after(millis(100), [&] { ++fired; });
  eng.schedule_after(millis(300), [&] { ++fired; });
  eng.run_until(millis(200));
  CHECK(fired == 1);
  CHECK(eng.now() == millis(200));
  CHECK(eng.pending() == 1);
  eng.run();
  CHECK(fired == 2);
  CHECK(eng.now() == millis(300));
}

TEST_CASE("post runs at the current instant in FIFO order") {
  Engine eng(ClockMode::Virtual);
  std::vector<int> order;
  eng.schedule_after(millis(5), [&] {
    order.push_back(1);
    eng.post([&] { order.push_back(2); });
    eng.post([&] { order.push_back(3); });
  });
  eng.schedule_after(millis(5), [&] { order.push_back(4); });
  eng.run();
  CHECK(order == std::vector<int>{1, 4, 2, 3});
  CHECK(eng.now() == millis(5));
}

TEST_CASE("real-clock engine dispatches scheduled work") {
  Engine eng(ClockMode::Real);
  bool fired = false;
  eng.schedule_after(millis(2), [&] {
    fired = true;
    eng.stop();
  });
  eng.run();
  CHECK(fired);
  CHECK(eng.now() >= millis(2));
}

TEST_CASE("net addresses parse and print") {
  auto a = NetAddr::parse("10.0.0.2:2427");
  REQUIRE(a.has_value());
  CHECK(a->host == "10.0.0.2");
  CHECK(a->port == 2427);
  CHECK(a->to_string() == "10.0.0.2:2427");
  CHECK_FALSE(NetAddr::parse("nohost").has_value());
  CHECK_FALSE(NetAddr::parse("h:0").has_value());
  CHECK_FALSE(NetAddr::parse("h:70000").has_value());
}

TEST_CASE("inproc transport delivers between bound sinks in order") {
  Engine eng(ClockMode::Virtual);
  InprocTransport net(eng);
  Recorder a, b;
  NetAddr addr_a{"a", 1000}, addr_b{"b", 2000};
  net.bind(addr_a, &a);
  net.bind(addr_b, &b);
  net.send({addr_a, addr_b, "one"});
  net.send({addr_a, addr_b, "two"});
  net.send({addr_b, addr_a, "three"});
  CHECK(b.got.empty());
  eng.run();
  REQUIRE(b.got.size() == 2);
  CHECK(b.got[0].payload == "one");
  CHECK(b.got[1].payload == "two");
  REQUIRE(a.got.size() == 1);
  CHECK(a.got[0].payload == "three");
}

TEST_CASE("drop filter swallows matches and the tap records everything") {
  Engine eng(ClockMode::Virtual);
  InprocTransport net(eng);
  Recorder b;
  TapRecorder tap;
  NetAddr addr_a{"a", 1}, addr_b{"b", 2};
  net.bind(addr_b, &b);
  net.set_tap(&tap);
  int dropped = 0;
  net.set_drop_filter([&](const Datagram& d) -> std::optional<std::string> {
    if (d.payload == "bad" && dropped == 0) {
      ++dropped;
      return "drop-first:bad";
    }
    return std::nullopt;
  });
  net.send({addr_a, addr_b, "bad"});
  net.send({addr_a, addr_b, "bad"});
  net.send({addr_a, addr_b, "fine"});
  net.send({addr_a, {"nowhere", 9}, "lost"});
  eng.run();
  REQUIRE(b.got.size() == 2);
  CHECK(b.got[0].payload == "bad");
  CHECK(b.got[1].payload == "fine");
  REQUIRE(tap.entries.size() == 4);
  CHECK(tap.entries[0].disp == WireDisposition::Dropped);
  CHECK(tap.entries[0].note == "drop-first:bad");
  CHECK(tap.entries[1].disp == WireDisposition::Delivered);
  CHECK(tap.entries[2].disp == WireDisposition::Delivered);
  CHECK(tap.entries[3].disp == WireDisposition::NoRoute);
}

TEST_CASE("inproc latency shifts delivery time") {
  Engine eng(ClockMode::Virtual);
  InprocTransport net(eng);
  Recorder b;
  NetAddr addr_a{"a", 1}, addr_b{"b", 2};
  net.bind(addr_b, &b);
  net.set_latency(millis(3));
  Micros delivered_at = -1;
  struct At : PacketSink {
    Engine& eng;
    Micros& at;
    At(Engine& e, Micros& a) : eng(e), at(a) {}
    void on_datagram(const Datagram&) override { at = eng.now(); }
  } sink(eng, delivered_at);
  net.bind(addr_b, &sink);
  net.send({addr_a, addr_b, "x"});
  eng.run();
  CHECK(delivered_at == millis(3));
}
