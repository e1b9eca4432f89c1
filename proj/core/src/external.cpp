#include "rsdazzle/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>

#include <json.hpp>

#include "rsdazzle/errors.hpp"

namespace rsdazzle {

using nlohmann::json;

std::vector<std::string> split_command(const std::string& command_line) {
  std::vector<std::string> argv;
  std::istringstream in(command_line);
  std::string tok;
  while (in >> tok) argv.push_back(tok);
  return argv;
}

ExternalClassifier::ExternalClassifier(const std::vector<std::string>& command, double timeout_s)
    : timeout_s_(timeout_s) {
  if (command.empty()) throw SessionError("external classifier: empty command");

  int to_child[2], from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0)
    throw SessionError("external classifier: pipe() failed");

  const int pid = fork();
  if (pid < 0) throw SessionError("external classifier: fork() failed");
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    std::vector<char*> argv;
    for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }

  pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
  close(to_child[0]);
  close(from_child[1]);

  // Handshake: the peer announces its class count.
  const std::string line = read_line();
  json hello = json::parse(line, nullptr, false);
  if (hello.is_discarded()) throw SessionError("handshake: reply is not valid JSON");
  if (!hello.contains("classes") || !hello["classes"].is_number_integer())
    throw SessionError("handshake: missing integer field 'classes'");
  classes_ = hello["classes"].get<int>();
  if (classes_ < 2) throw SessionError("handshake: field 'classes' must be >= 2");
}

ExternalClassifier::~ExternalClassifier() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    kill(pid_, SIGTERM);
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

std::string ExternalClassifier::read_line() {
  for (;;) {
    const size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(timeout_s_ * 1000.0));
    if (rc == 0) throw SessionError("external classifier: reply timeout");
    if (rc < 0) throw SessionError(std::string("external classifier: poll failed: ") + strerror(errno));
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n == 0) throw SessionError("external classifier: peer exited (EOF on reply stream)");
    if (n < 0) throw SessionError(std::string("external classifier: read failed: ") + strerror(errno));
    buffer_.append(chunk, static_cast<size_t>(n));
  }
}

void ExternalClassifier::write_line(const std::string& line) {
  std::string out = line;
  out.push_back('\n');
  size_t off = 0;
  while (off < out.size()) {
    const ssize_t n = write(to_child_, out.data() + off, out.size() - off);
    if (n <= 0) throw SessionError("external classifier: peer closed its request stream");
    off += static_cast<size_t>(n);
  }
}

std::vector<double> ExternalClassifier::roundtrip(const Image& x, int label, const std::string& op,
                                                  const std::string& reply_key, size_t expect_len) {
  const long long id = next_id_++;
  json req;
  req["id"] = id;
  req["op"] = op;
  req["label"] = label;
  req["shape"] = {x.height, x.width, x.channels};
  req["pixels"] = x.data;
  write_line(req.dump());

  json reply = json::parse(read_line(), nullptr, false);
  if (reply.is_discarded()) throw SessionError("reply: not valid JSON");
  if (!reply.contains("id") || !reply["id"].is_number_integer())
    throw SessionError("reply: missing integer field 'id'");
  if (reply["id"].get<long long>() != id)
    throw SessionError("reply: field 'id' mismatch (got " +
                       std::to_string(reply["id"].get<long long>()) + ", want " +
                       std::to_string(id) + ")");
  if (!reply.contains(reply_key) || !reply[reply_key].is_array())
    throw SessionError("reply: missing array field '" + reply_key + "'");
  std::vector<double> values;
  values.reserve(reply[reply_key].size());
  for (const auto& v : reply[reply_key]) {
    if (!v.is_number()) throw SessionError("reply: field '" + reply_key + "' has a non-numeric entry");
    values.push_back(v.get<double>());
  }
  if (values.size() != expect_len)
    throw SessionError("reply: field '" + reply_key + "' has length " +
                       std::to_string(values.size()) + ", want " + std::to_string(expect_len));
  return values;
}

std::vector<double> ExternalClassifier::logits(const Image& x) {
  return roundtrip(x, 0, "logits", "logits", static_cast<size_t>(classes_));
}

Tensor ExternalClassifier::input_gradient(const Image& x, int label) {
  if (label < 0 || label >= classes_)
    throw std::invalid_argument("ExternalClassifier: label out of range");
  std::vector<double> g = roundtrip(x, label, "grad", "grad", x.size());
  Tensor out(x.height, x.width, x.channels);
  out.data = std::move(g);
  return out;
}

}  // namespace rsdazzle
