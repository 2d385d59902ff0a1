#pragma once

// Collective decisions: the outcomes every rank agrees on at a loop head
// (enter another iteration or leave) and at a choice (true or false branch).

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace commtype {

enum class DecisionKind { LoopContinue, Choice };

class TapeExhausted : public std::runtime_error {
 public:
  TapeExhausted() : std::runtime_error("decision tape exhausted") {}
};

class DecisionSource {
 public:
  virtual ~DecisionSource() = default;

  /// `iteration` is the number of iterations the current loop visit has
  /// completed; always 0 for choices.
  virtual bool decide(DecisionKind kind, int iteration) = 0;
};

/// A finite sequence of outcomes consumed front to back. A loop that runs n
/// times consumes n `true`s followed by one `false`; a choice consumes one
/// entry (true selects the first branch).
class DecisionTape : public DecisionSource {
 public:
  DecisionTape() = default;
  explicit DecisionTape(std::vector<bool> entries) : entries_(std::move(entries)) {}

  /// Throws TapeExhausted when no entries remain.
  bool decide(DecisionKind kind, int iteration) override;

  const std::vector<bool>& entries() const { return entries_; }
  std::size_t consumed() const { return cursor_; }
  void rewind() { cursor_ = 0; }

 private:
  std::vector<bool> entries_;
  std::size_t cursor_ = 0;
};

/// Entries for a loop taken `iterations` times around a body with no decisions.
std::vector<bool> loop_entries(int iterations);

std::string to_string(const std::vector<bool>& tape);

/// Every decision sequence that `run` can consume when loops iterate between
/// 0 and `max_loop_iters` times per visit and choices go either way. `run` is
/// re-executed once per sequence and must be deterministic given its
/// decisions. Exit-the-loop and the true branch are explored first.
std::vector<std::vector<bool>> enumerate_tapes(const std::function<void(DecisionSource&)>& run,
                                               int max_loop_iters);

}  // namespace commtype
