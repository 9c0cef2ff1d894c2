#include "tagnav/observation.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "tagnav/error.hpp"
#include "text_util.hpp"

namespace tagnav {

double TagObservation::quad_area() const {
  double twice = 0.0;
  for (std::size_t i = 0; i < corners.size(); ++i) {
    const auto& a = corners[i];
    const auto& b = corners[(i + 1) % corners.size()];
    twice += a.u * b.v - b.u * a.v;
  }
  return 0.5 * twice;
}

void TagObservation::validate() const {
  if (tag_id < 0) throw InvalidArgument("tag id must be non-negative");
  for (const auto& c : corners) {
    if (!std::isfinite(c.u) || !std::isfinite(c.v)) {
      throw InvalidArgument("tag corner is not finite");
    }
  }
  if (std::abs(quad_area()) <= 1e-9) {
    throw InvalidArgument("tag corners are collinear");
  }
}

TagObservation parse_observation_line(const std::string& line) {
  const auto tokens = detail::split_ws(detail::trim(line));
  if (tokens.size() != 9) {
    throw FormatError("observation line needs 9 fields, got " + std::to_string(tokens.size()));
  }
  TagObservation obs;
  const auto id = detail::parse_int(tokens[0]);
  if (!id || *id < 0) throw FormatError("bad tag id '" + std::string(tokens[0]) + "'");
  obs.tag_id = static_cast<int>(*id);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto u = detail::parse_double(tokens[1 + 2 * i]);
    const auto v = detail::parse_double(tokens[2 + 2 * i]);
    if (!u || !v) throw FormatError("bad corner coordinate in '" + line + "'");
    obs.corners[i] = {*u, *v};
  }
  return obs;
}

std::string format_observation_line(const TagObservation& obs) {
  std::string out = std::to_string(obs.tag_id);
  for (const auto& c : obs.corners) {
    out += ' ';
    out += detail::format_double(c.u);
    out += ' ';
    out += detail::format_double(c.v);
  }
  return out;
}

std::vector<TagObservation> read_observations(std::istream& in) {
  std::vector<TagObservation> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    out.push_back(parse_observation_line(std::string(body)));
  }
  return out;
}

void write_observations(std::ostream& out, const std::vector<TagObservation>& obs) {
  for (const auto& o : obs) out << format_observation_line(o) << '\n';
}

}  // namespace tagnav
