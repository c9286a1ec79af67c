// SPDX-License-Identifier: Apache-2.0

#include "promptlab/choice.hpp"

#include <string>

#include "promptlab/errors.hpp"

namespace promptlab {

ChoiceResolver ChoiceResolver::seeded(std::uint64_t seed,
                                      std::uint64_t example_ordinal) {
  ChoiceResolver r;
  r.mode_ = Mode::Seeded;
  r.state_ = example_stream_seed(seed, example_ordinal);
  return r;
}

ChoiceResolver ChoiceResolver::fixed(std::vector<std::size_t> path,
                                     bool pad_with_first) {
  ChoiceResolver r;
  r.mode_ = Mode::Fixed;
  r.path_ = std::move(path);
  r.pad_ = pad_with_first;
  return r;
}

ChoiceResolver ChoiceResolver::recording(std::vector<std::size_t> prefix) {
  ChoiceResolver r;
  r.mode_ = Mode::Recording;
  r.path_ = std::move(prefix);
  r.pad_ = true;
  return r;
}

std::size_t ChoiceResolver::pick(std::size_t list_length) {
  const std::size_t k = lengths_.size();
  if (list_length == 0) {
    throw RenderError("ChoiceError", "choice() called on an empty list");
  }
  std::size_t index = 0;
  if (mode_ == Mode::Seeded) {
    auto step = splitmix64_next(state_);
    state_ = step.state;
    index = static_cast<std::size_t>(step.value % list_length);
  } else if (k < path_.size()) {
    index = path_[k];
    if (index >= list_length) {
      throw RenderError("ChoiceError",
                        "choice call " + std::to_string(k) + " asked for index " +
                            std::to_string(index) + " of a list of length " +
                            std::to_string(list_length));
    }
  } else if (!pad_) {
    throw RenderError("ChoiceError", "choice call " + std::to_string(k) +
                                         " has no entry in a fixed path of length " +
                                         std::to_string(path_.size()));
  }
  lengths_.push_back(list_length);
  taken_.push_back(index);
  return index;
}

}  // namespace promptlab
