#include "xslice/e2lite.hpp"

#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "xslice/ransim.hpp"

namespace xslice {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---- encode ----

namespace {

void put_kv(std::string& out, const char* key, int v) {
  out += '"';
  out += key;
  out += "\":";
  out += std::to_string(v);
}

void put_kv(std::string& out, const char* key, double v) {
  out += '"';
  out += key;
  out += "\":";
  out += format_double(v);
}

void put_kv(std::string& out, const char* key, const std::string& v) {
  // only digest strings travel the wire; they are plain hex, no escaping
  out += '"';
  out += key;
  out += "\":\"";
  out += v;
  out += '"';
}

}  // namespace

std::string encode(const E2Message& msg) {
  std::string out;
  out.reserve(64);
  out += "{\"type\":\"";
  if (const auto* m = std::get_if<Subscribe>(&msg)) {
    out += "subscribe\",";
    put_kv(out, "period_ms", m->period_ms);
  } else if (const auto* m = std::get_if<KpmReport>(&msg)) {
    out.reserve(64 + m->records.size() * 160);
    out += "kpm_report\",";
    put_kv(out, "round", m->round);
    out += ',';
    put_kv(out, "digest", m->digest);
    out += ",\"records\":[";
    bool first = true;
    for (const auto& r : m->records) {
      if (!first) out += ',';
      first = false;
      out += '{';
      put_kv(out, "session_id", r.session_id);
      out += ',';
      put_kv(out, "throughput_mbps", r.throughput_mbps);
      out += ',';
      put_kv(out, "delay_ms", r.delay_ms);
      out += ',';
      put_kv(out, "bler", r.bler);
      out += ',';
      put_kv(out, "prbs_used", r.prbs_used);
      out += ',';
      put_kv(out, "pusch_snr_db", r.pusch_snr_db);
      out += ',';
      put_kv(out, "phr_db", r.phr_db);
      out += ',';
      put_kv(out, "mcs", r.mcs);
      out += ',';
      put_kv(out, "current_tbs", r.current_tbs);
      out += ',';
      put_kv(out, "scheduled_rbs", r.scheduled_rbs);
      out += '}';
    }
    out += ']';
  } else if (const auto* m = std::get_if<SliceCommand>(&msg)) {
    out += "slice_command\",";
    put_kv(out, "round", m->round);
    out += ",\"grants\":[";
    bool first = true;
    for (const auto& g : m->allocation.grants) {
      if (!first) out += ',';
      first = false;
      out += '{';
      put_kv(out, "start_prb", g.start_prb);
      out += ',';
      put_kv(out, "num_prb", g.num_prb);
      out += '}';
    }
    out += ']';
  } else if (const auto* m = std::get_if<Ack>(&msg)) {
    out += "ack\",";
    put_kv(out, "round", m->round);
  } else {
    out += "bye\"";
  }
  out += "}\n";
  return out;
}

// ---- decode ----

namespace {

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DecodeError(std::string("missing field: ") + key, 0);
  return *it;
}

double num_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw DecodeError(std::string("field not a number: ") + key, 0);
  return v.get<double>();
}

int int_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw DecodeError(std::string("field not an integer: ") + key, 0);
  return v.get<int>();
}

std::string str_field(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw DecodeError(std::string("field not a string: ") + key, 0);
  return v.get<std::string>();
}

}  // namespace

E2Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DecodeError(e.what(), e.byte);
  } catch (const json::exception& e) {
    // e.g. number overflow: the parser throws out_of_range, not parse_error
    throw DecodeError(e.what(), 0);
  }
  if (!j.is_object()) throw DecodeError("message must be a JSON object", 0);
  const std::string type = str_field(j, "type");

  if (type == "subscribe") {
    Subscribe m;
    m.period_ms = num_field(j, "period_ms");
    return m;
  }
  if (type == "kpm_report") {
    KpmReport m;
    m.round = int_field(j, "round");
    m.digest = str_field(j, "digest");
    const json& recs = require(j, "records");
    if (!recs.is_array()) throw DecodeError("records must be an array", 0);
    m.records.reserve(recs.size());
    for (const auto& rj : recs) {
      if (!rj.is_object()) throw DecodeError("record must be an object", 0);
      KpmRecord r;
      r.session_id = int_field(rj, "session_id");
      r.throughput_mbps = num_field(rj, "throughput_mbps");
      r.delay_ms = num_field(rj, "delay_ms");
      r.bler = num_field(rj, "bler");
      r.prbs_used = int_field(rj, "prbs_used");
      r.pusch_snr_db = num_field(rj, "pusch_snr_db");
      r.phr_db = num_field(rj, "phr_db");
      r.mcs = int_field(rj, "mcs");
      r.current_tbs = int_field(rj, "current_tbs");
      r.scheduled_rbs = int_field(rj, "scheduled_rbs");
      m.records.push_back(r);
    }
    return m;
  }
  if (type == "slice_command") {
    SliceCommand m;
    m.round = int_field(j, "round");
    const json& grants = require(j, "grants");
    if (!grants.is_array()) throw DecodeError("grants must be an array", 0);
    for (const auto& gj : grants) {
      if (!gj.is_object()) throw DecodeError("grant must be an object", 0);
      PrbGrant g;
      g.start_prb = int_field(gj, "start_prb");
      g.num_prb = int_field(gj, "num_prb");
      m.allocation.grants.push_back(g);
    }
    return m;
  }
  if (type == "ack") {
    Ack m;
    m.round = int_field(j, "round");
    return m;
  }
  if (type == "bye") return Bye{};
  throw UnsupportedMessage("unsupported message type: " + type);
}

std::string slice_digest(std::span<const SliceSpec> specs) {
  std::string canon;
  for (const auto& s : specs) {
    canon += std::to_string(s.id);
    canon += '|';
    canon += format_double(s.throughput_demand_mbps);
    canon += '|';
    canon += format_double(s.delay_demand_ms);
    canon += '|';
    canon += format_double(s.bler_demand);
    canon += '|';
    canon += format_double(s.weight_tp);
    canon += '|';
    canon += format_double(s.weight_delay);
    canon += '|';
    canon += format_double(s.weight_rel);
    canon += '|';
    canon += to_string(s.scheduler);
    canon += ';';
  }
  uint64_t h = fnv1a64(canon.data(), canon.size());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

// ---- in-process transport ----

namespace {

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> q;
  bool closed = false;
};

class InProcTransport final : public Transport {
 public:
  InProcTransport(std::shared_ptr<Channel> in, std::shared_ptr<Channel> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~InProcTransport() override { close(); }

  bool send_line(const std::string& line) override {
    std::lock_guard<std::mutex> lock(out_->mu);
    if (out_->closed) return false;
    out_->q.push_back(line);
    out_->cv.notify_all();
    return true;
  }

  RecvStatus recv_line(std::string& line, int timeout_ms) override {
    std::unique_lock<std::mutex> lock(in_->mu);
    auto ready = [this] { return !in_->q.empty() || in_->closed; };
    if (timeout_ms < 0) {
      in_->cv.wait(lock, ready);
    } else if (!in_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms), ready)) {
      return RecvStatus::Timeout;
    }
    if (!in_->q.empty()) {
      line = std::move(in_->q.front());
      in_->q.pop_front();
      if (!line.empty() && line.back() == '\n') line.pop_back();
      return RecvStatus::Ok;
    }
    return RecvStatus::Closed;
  }

  void close() override {
    for (auto* ch : {in_.get(), out_.get()}) {
      std::lock_guard<std::mutex> lock(ch->mu);
      ch->closed = true;
      ch->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Channel> in_, out_;
};

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_inproc_pair() {
  auto a = std::make_shared<Channel>();
  auto b = std::make_shared<Channel>();
  return {std::make_unique<InProcTransport>(a, b), std::make_unique<InProcTransport>(b, a)};
}

// ---- unix-socket transport ----

namespace {

class UnixTransport final : public Transport {
 public:
  explicit UnixTransport(int fd) : fd_(fd) {}
  ~UnixTransport() override { close(); }

  bool send_line(const std::string& line) override {
    size_t off = 0;
    while (off < line.size()) {
      ssize_t n = ::send(fd_, line.data() + off, line.size() - off, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<size_t>(n);
    }
    return true;
  }

  RecvStatus recv_line(std::string& line, int timeout_ms) override {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (true) {
      if (size_t pos = buf_.find('\n'); pos != std::string::npos) {
        line.assign(buf_, 0, pos);
        buf_.erase(0, pos + 1);
        return RecvStatus::Ok;
      }
      if (eof_ || fd_ < 0) return RecvStatus::Closed;
      int wait = -1;
      if (timeout_ms >= 0) {
        auto rem = std::chrono::duration_cast<std::chrono::milliseconds>(
                       deadline - std::chrono::steady_clock::now())
                       .count();
        if (rem <= 0) return RecvStatus::Timeout;
        wait = static_cast<int>(rem);
      }
      struct pollfd p{fd_, POLLIN, 0};
      int pr = ::poll(&p, 1, wait);
      if (pr == 0) return RecvStatus::Timeout;
      if (pr < 0) {
        if (errno == EINTR) continue;
        return RecvStatus::Closed;
      }
      char chunk[4096];
      ssize_t n = ::read(fd_, chunk, sizeof(chunk));
      if (n == 0) {
        eof_ = true;
        continue;  // flush any complete buffered line first
      }
      if (n < 0) {
        if (errno == EINTR) continue;
        return RecvStatus::Closed;
      }
      buf_.append(chunk, static_cast<size_t>(n));
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string buf_;
  bool eof_ = false;
};

int make_unix_socket() {
  int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("e2lite: socket() failed");
  return fd;
}

sockaddr_un make_addr(const std::string& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path))
    throw std::runtime_error("e2lite: socket path too long: " + path);
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  return addr;
}

}  // namespace

std::unique_ptr<Transport> unix_listen(const std::string& path) {
  int srv = make_unix_socket();
  sockaddr_un addr = make_addr(path);
  ::unlink(path.c_str());
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(srv);
    throw std::runtime_error("e2lite: cannot bind " + path);
  }
  if (::listen(srv, 1) < 0) {
    ::close(srv);
    throw std::runtime_error("e2lite: listen failed on " + path);
  }
  int fd = ::accept(srv, nullptr, nullptr);
  ::close(srv);
  if (fd < 0) throw std::runtime_error("e2lite: accept failed on " + path);
  return std::make_unique<UnixTransport>(fd);
}

std::unique_ptr<Transport> unix_connect(const std::string& path, int retry_ms) {
  sockaddr_un addr = make_addr(path);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(retry_ms);
  while (true) {
    int fd = make_unix_socket();
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0)
      return std::make_unique<UnixTransport>(fd);
    ::close(fd);
    if (std::chrono::steady_clock::now() >= deadline)
      throw std::runtime_error("e2lite: cannot connect to " + path);
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
}

// ---- endpoint loops ----

RanEndpointStats run_ran_endpoint(RanEnv& env, Transport& t, int deadline_ms, int max_rounds,
                                  const Allocation& initial) {
  RanEndpointStats st;
  const std::string digest = slice_digest(env.scenario().slices);
  std::string line;

  // handshake: one subscriber
  if (t.recv_line(line, -1) != RecvStatus::Ok) return st;
  try {
    E2Message msg = decode(line);
    if (!std::holds_alternative<Subscribe>(msg)) return st;
  } catch (const DecodeError&) {
    return st;
  }
  if (!t.send_line(encode(Ack{env.round()}))) return st;

  Allocation current = initial;
  std::vector<KpmRecord> last_records;
  bool peer_gone = false;

  while (st.rounds < max_rounds && !peer_gone) {
    KpmReport report;
    report.round = env.round();
    report.digest = digest;
    report.records = last_records;
    if (!t.send_line(encode(report))) break;

    bool fresh = false;
    bool bye = false;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(deadline_ms);
    while (!fresh && !bye && !peer_gone) {
      int wait = -1;
      if (deadline_ms > 0) {
        auto rem = std::chrono::duration_cast<std::chrono::milliseconds>(
                       deadline - std::chrono::steady_clock::now())
                       .count();
        if (rem <= 0) break;
        wait = static_cast<int>(rem);
      }
      RecvStatus rs = t.recv_line(line, wait);
      if (rs == RecvStatus::Timeout) break;
      if (rs == RecvStatus::Closed) {
        peer_gone = true;
        break;
      }
      try {
        E2Message msg = decode(line);
        if (const auto* cmd = std::get_if<SliceCommand>(&msg)) {
          if (cmd->round == report.round) {
            current = cmd->allocation;
            fresh = true;
          }
          // commands for stale rounds are dropped: an allocation computed for
          // round t must not steer round t+2
        } else if (std::holds_alternative<Bye>(msg)) {
          bye = true;
        }
      } catch (const DecodeError& e) {
        std::fprintf(stderr, "[ran] decode error at byte %zu: %s\n", e.byte_offset, e.what());
      }
    }
    if (bye) {
      st.clean_shutdown = true;
      break;
    }
    if (peer_gone) break;

    last_records = env.step(current);
    ++st.rounds;
    if (fresh)
      ++st.fresh_commands;
    else
      ++st.stale_fallbacks;
  }

  if (st.rounds >= max_rounds) {
    // emit the closing report so the subscriber sees the last round's
    // records, drain its answer, then say goodbye
    KpmReport final_report;
    final_report.round = env.round();
    final_report.digest = digest;
    final_report.records = last_records;
    if (t.send_line(encode(final_report))) {
      const auto deadline =
          std::chrono::steady_clock::now() + std::chrono::milliseconds(deadline_ms);
      while (true) {
        int wait = -1;
        if (deadline_ms > 0) {
          auto rem = std::chrono::duration_cast<std::chrono::milliseconds>(
                         deadline - std::chrono::steady_clock::now())
                         .count();
          if (rem <= 0) break;
          wait = static_cast<int>(rem);
        }
        RecvStatus rs = t.recv_line(line, wait);
        if (rs != RecvStatus::Ok) break;
        try {
          E2Message msg = decode(line);
          if (std::holds_alternative<SliceCommand>(msg) || std::holds_alternative<Bye>(msg))
            break;
        } catch (const DecodeError&) {
        }
      }
    }
    t.send_line(encode(Bye{}));
    st.clean_shutdown = true;
  }
  return st;
}

XappEndpointStats run_xapp_endpoint(Transport& t, double period_ms,
                                    const std::function<Allocation(const KpmReport&)>& decide,
                                    const std::function<void(const KpmReport&)>& after_reply) {
  XappEndpointStats st;
  if (!t.send_line(encode(Subscribe{period_ms}))) return st;
  std::string line;
  while (true) {
    RecvStatus rs = t.recv_line(line, -1);
    if (rs != RecvStatus::Ok) break;
    E2Message msg;
    try {
      msg = decode(line);
    } catch (const DecodeError& e) {
      std::fprintf(stderr, "[xapp] decode error at byte %zu: %s\n", e.byte_offset, e.what());
      ++st.decode_errors;
      continue;
    }
    if (std::holds_alternative<Bye>(msg)) {
      st.clean_shutdown = true;
      break;
    }
    if (const auto* rep = std::get_if<KpmReport>(&msg)) {
      SliceCommand cmd;
      cmd.round = rep->round;
      cmd.allocation = decide(*rep);
      if (!t.send_line(encode(cmd))) break;
      ++st.rounds;
      if (after_reply) after_reply(*rep);
    }
    // acks and stray subscribes are ignored
  }
  return st;
}

}  // namespace xslice
