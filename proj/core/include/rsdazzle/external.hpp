#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rsdazzle/classifier.hpp"

namespace rsdazzle {

// Classifier served by a child process speaking line-delimited JSON over its
// standard input/output. On startup the peer declares {"classes":K}; each
// request {"id":n,"op":"logits"|"grad","label":l,"shape":[h,w,c],
// "pixels":[...]} is answered by {"id":n,"logits":[...]} or
// {"id":n,"grad":[...]}. One request in flight at a time; callers serialize
// access per session. Protocol violations, timeouts and peer death raise
// SessionError with a diagnostic naming the offending field.
class ExternalClassifier : public Classifier {
 public:
  explicit ExternalClassifier(const std::vector<std::string>& command, double timeout_s = 30.0);
  ~ExternalClassifier() override;

  ExternalClassifier(const ExternalClassifier&) = delete;
  ExternalClassifier& operator=(const ExternalClassifier&) = delete;

  int num_classes() const override { return classes_; }
  std::vector<double> logits(const Image& x) override;
  Tensor input_gradient(const Image& x, int label) override;
  bool concurrent_safe() const override { return false; }

 private:
  std::vector<double> roundtrip(const Image& x, int label, const std::string& op,
                                const std::string& reply_key, size_t expect_len);
  std::string read_line();
  void write_line(const std::string& line);

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  double timeout_s_;
  int classes_ = 0;
  long long next_id_ = 1;
  std::string buffer_;
};

// Splits an "exec:<command line>" classifier spec into argv (whitespace
// separated, no quoting).
std::vector<std::string> split_command(const std::string& command_line);

}  // namespace rsdazzle
