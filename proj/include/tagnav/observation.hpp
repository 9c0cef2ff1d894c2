#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace tagnav {

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Detector output for one tag: the id plus its four image corners ordered
/// top-left, top-right, bottom-right, bottom-left as seen when the tag
/// faces the camera squarely.
struct TagObservation {
  int tag_id = 0;
  std::array<PixelPoint, 4> corners{};

  /// Signed shoelace area of the corner quad in square pixels.
  double quad_area() const;

  /// Throws InvalidArgument on a negative id, non-finite corners or a
  /// degenerate (zero-area / collinear) quad.
  void validate() const;

  friend bool operator==(const TagObservation&, const TagObservation&) = default;
};

// Replay format: one observation per line, `tag_id u0 v0 u1 v1 u2 v2 u3 v3`.
TagObservation parse_observation_line(const std::string& line);
std::string format_observation_line(const TagObservation& obs);
std::vector<TagObservation> read_observations(std::istream& in);
void write_observations(std::ostream& out, const std::vector<TagObservation>& obs);

}  // namespace tagnav
