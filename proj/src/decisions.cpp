#include "commtype/decisions.hpp"

namespace commtype {

bool DecisionTape::decide(DecisionKind /*kind*/, int /*iteration*/) {
  if (cursor_ >= entries_.size()) throw TapeExhausted();
  return entries_[cursor_++];
}

std::vector<bool> loop_entries(int iterations) {
  std::vector<bool> out(static_cast<std::size_t>(iterations), true);
  out.push_back(false);
  return out;
}

std::string to_string(const std::vector<bool>& tape) {
  std::string out = "[";
  for (std::size_t i = 0; i < tape.size(); ++i) {
    if (i > 0) out += " ";
    out += tape[i] ? "1" : "0";
  }
  return out + "]";
}

namespace {

struct Branch {
  std::vector<bool> options;
  std::size_t index = 0;
};

// Replays the decisions on `stack` and opens a new branch point past its end.
class EnumeratingSource : public DecisionSource {
 public:
  EnumeratingSource(std::vector<Branch>& stack, int max_loop_iters)
      : stack_(stack), max_loop_iters_(max_loop_iters) {}

  bool decide(DecisionKind kind, int iteration) override {
    if (pos_ == stack_.size()) {
      Branch b;
      if (kind == DecisionKind::Choice) {
        b.options = {true, false};
      } else if (iteration < max_loop_iters_) {
        b.options = {false, true};
      } else {
        b.options = {false};
      }
      stack_.push_back(std::move(b));
    }
    const Branch& b = stack_[pos_++];
    bool value = b.options[b.index];
    taken_.push_back(value);
    return value;
  }

  std::vector<bool> taken() && { return std::move(taken_); }

 private:
  std::vector<Branch>& stack_;
  int max_loop_iters_;
  std::size_t pos_ = 0;
  std::vector<bool> taken_;
};

}  // namespace

std::vector<std::vector<bool>> enumerate_tapes(const std::function<void(DecisionSource&)>& run,
                                               int max_loop_iters) {
  std::vector<std::vector<bool>> out;
  std::vector<Branch> stack;
  for (;;) {
    EnumeratingSource src(stack, max_loop_iters);
    run(src);
    out.push_back(std::move(src).taken());
    while (!stack.empty() && stack.back().index + 1 >= stack.back().options.size()) {
      stack.pop_back();
    }
    if (stack.empty()) return out;
    ++stack.back().index;
  }
}

}  // namespace commtype
