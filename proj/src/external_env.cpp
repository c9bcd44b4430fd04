#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "evorace/environment.hpp"
#include "evorace/errors.hpp"

namespace evorace {

namespace {

const char kB64Table[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned v = data[i] << 16;
    if (i + 1 < len) v |= data[i + 1] << 8;
    if (i + 2 < len) v |= data[i + 2];
    out.push_back(kB64Table[(v >> 18) & 63]);
    out.push_back(kB64Table[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? kB64Table[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? kB64Table[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& in) {
  static const auto value = [] {
    std::array<int, 256> v;
    v.fill(-1);
    for (int i = 0; i < 64; ++i) v[static_cast<unsigned char>(kB64Table[i])] = i;
    return v;
  }();
  std::vector<unsigned char> out;
  out.reserve(in.size() / 4 * 3);
  int acc = 0, bits = 0;
  for (char ch : in) {
    if (ch == '=' || ch == '\n' || ch == '\r') continue;
    const int d = value[static_cast<unsigned char>(ch)];
    if (d < 0) throw IoError("invalid base64 in environment reply");
    acc = (acc << 6) | d;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace

ExternalEnvironment::ExternalEnvironment(const std::string& command) {
  int to_pipe[2], from_pipe[2];
  if (pipe(to_pipe) != 0 || pipe(from_pipe) != 0)
    throw IoError("cannot create pipes for external environment");
  const pid_t pid = fork();
  if (pid < 0) throw IoError("cannot fork external environment");
  if (pid == 0) {
    dup2(to_pipe[0], STDIN_FILENO);
    dup2(from_pipe[1], STDOUT_FILENO);
    close(to_pipe[0]);
    close(to_pipe[1]);
    close(from_pipe[0]);
    close(from_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_pipe[0]);
  close(from_pipe[1]);
  child_pid_ = pid;
  to_child_ = to_pipe[1];
  from_child_ = from_pipe[0];
}

ExternalEnvironment::~ExternalEnvironment() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (child_pid_ > 0) {
    kill(child_pid_, SIGTERM);
    int status = 0;
    waitpid(child_pid_, &status, 0);
  }
}

std::string ExternalEnvironment::exchange(const std::string& request) {
  std::string line = request;
  line.push_back('\n');
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
    if (n <= 0) throw IoError("external environment closed its input");
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    const std::size_t nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      return reply;
    }
    char buf[4096];
    const ssize_t n = read(from_child_, buf, sizeof buf);
    if (n <= 0) throw IoError("external environment closed its output");
    read_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

namespace {

track::Frame decode_frame(const std::string& b64) {
  const auto bytes = base64_decode(b64);
  constexpr std::size_t kExpected =
      static_cast<std::size_t>(agent::kFrameDim) * agent::kFrameDim *
      agent::kFrameChannels * sizeof(float);
  if (bytes.size() != kExpected)
    throw IoError("external observation has wrong size: " +
                  std::to_string(bytes.size()) + " bytes");
  track::Frame f(agent::kFrameDim, agent::kFrameDim, agent::kFrameChannels);
  std::memcpy(f.data.data(), bytes.data(), bytes.size());
  return f;
}

}  // namespace

int ExternalEnvironment::reset(std::uint64_t seed) {
  nlohmann::json req{{"cmd", "reset"}, {"seed", seed}};
  const auto reply = nlohmann::json::parse(exchange(req.dump()));
  frame_ = decode_frame(reply.at("obs").get<std::string>());
  return reply.value("n_tiles", -1);
}

Environment::StepOutcome ExternalEnvironment::step(const agent::Action& action) {
  nlohmann::json req{
      {"cmd", "step"},
      {"action", {action.steer, action.gas, action.brake}}};
  const auto reply = nlohmann::json::parse(exchange(req.dump()));
  StepOutcome out;
  out.reward = reply.at("reward").get<double>();
  out.done = reply.at("done").get<bool>();
  // Any reward above the constant frame penalty means a tile was credited.
  out.new_tile = out.reward > frame_reward_rate() + 1e-9;
  if (!out.done && reply.contains("obs"))
    frame_ = decode_frame(reply.at("obs").get<std::string>());
  return out;
}

// Encoder half of the frame codec, exported for the test harness and any
// adapter that wants to reuse it.
std::string encode_frame_base64(const track::Frame& f) {
  return base64_encode(
      reinterpret_cast<const unsigned char*>(f.data.data()),
      f.data.size() * sizeof(float));
}

}  // namespace evorace
