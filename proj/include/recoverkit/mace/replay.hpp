#ifndef RECOVERKIT_MACE_REPLAY_HPP
#define RECOVERKIT_MACE_REPLAY_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "recoverkit/envs/fall.hpp"
#include "recoverkit/rng.hpp"

namespace recoverkit::mace {

// One contact transition. c is the body part the action drove toward the
// ground; terminal marks the end of the fall (arrested or flat on the ground),
// where no further impact can follow.
struct ReplayTuple {
  envs::FallState s;
  envs::FallAction a;
  envs::FallState s_next;
  double r = 1.0;
  int c = 0;
  bool terminal = false;
};

// Fixed-capacity FIFO tuple store. Index 0 is the oldest surviving tuple.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay: zero capacity");
  }

  void push(const ReplayTuple& t) {
    if (!(t.r > 0.0 && t.r <= 1.0))
      throw std::invalid_argument("replay: reward outside (0, 1]");
    if (t.c < 0) throw std::invalid_argument("replay: negative part index");
    if (data_.size() < cap_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % cap_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return cap_; }

  const ReplayTuple& operator[](std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("replay: index");
    return data_[(head_ + i) % data_.size()];
  }

  const ReplayTuple& sample(RngStream& rng) const {
    if (data_.empty()) throw std::logic_error("replay: sampling empty buffer");
    return data_[rng.uniform_int(static_cast<int>(data_.size()))];
  }

 private:
  std::size_t cap_, head_ = 0;
  std::vector<ReplayTuple> data_;
};

}  // namespace recoverkit::mace

#endif
