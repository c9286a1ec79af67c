// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace promptlab {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

struct SplitMixStep {
  std::uint64_t value;
  std::uint64_t state;
};

/// One step of splitmix64: advances `state` by the golden gamma and mixes.
constexpr SplitMixStep splitmix64_next(std::uint64_t state) {
  std::uint64_t z = state + kGoldenGamma;
  const std::uint64_t advanced = z;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return {z ^ (z >> 31), advanced};
}

/// Initial stream state for one example under a global seed.
constexpr std::uint64_t example_stream_seed(std::uint64_t seed,
                                            std::uint64_t example_ordinal) {
  return seed ^ (example_ordinal * kGoldenGamma);
}

/// Resolves each `choice(list)` call made during one render to an index.
///
/// - Seeded: the k-th call takes the k-th splitmix64 draw of the example's
///   stream, modulo the list length.
/// - Fixed: the k-th call takes `path[k]`. Running past the end of the path
///   is an error unless the resolver was built with `pad_with_first`, in
///   which case extra calls take index 0 (used for stable previews).
/// - Recording: like a padded fixed path; exists to discover the lengths of
///   the choice lists along the executed path.
///
/// Every mode records the list length and chosen index of each call.
class ChoiceResolver {
 public:
  enum class Mode { Seeded, Fixed, Recording };

  static ChoiceResolver seeded(std::uint64_t seed, std::uint64_t example_ordinal);
  static ChoiceResolver fixed(std::vector<std::size_t> path,
                              bool pad_with_first = false);
  static ChoiceResolver recording(std::vector<std::size_t> prefix = {});

  /// Throws RenderError(ChoiceError) when the list is empty or the fixed
  /// path cannot supply a valid index.
  std::size_t pick(std::size_t list_length);

  Mode mode() const noexcept { return mode_; }
  std::size_t calls() const noexcept { return lengths_.size(); }
  const std::vector<std::size_t>& lengths() const noexcept { return lengths_; }
  const std::vector<std::size_t>& taken() const noexcept { return taken_; }

 private:
  ChoiceResolver() = default;

  Mode mode_ = Mode::Fixed;
  std::uint64_t state_ = 0;
  std::vector<std::size_t> path_;
  bool pad_ = false;
  std::vector<std::size_t> lengths_;
  std::vector<std::size_t> taken_;
};

}  // namespace promptlab
