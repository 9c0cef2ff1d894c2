#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tagnav/error.hpp"
#include "tagnav/observation.hpp"

using namespace tagnav;

TEST(Observation, AreaIsSignedShoelace) {
  TagObservation obs{0, {{{0, 0}, {2, 0}, {2, 3}, {0, 3}}}};
  EXPECT_DOUBLE_EQ(obs.quad_area(), 6.0);
  std::swap(obs.corners[1], obs.corners[3]);
  EXPECT_DOUBLE_EQ(obs.quad_area(), -6.0);
}

TEST(Observation, ValidateRejectsBadInput) {
  TagObservation ok{0, {{{0, 0}, {2, 0}, {2, 3}, {0, 3}}}};
  EXPECT_NO_THROW(ok.validate());
  auto neg = ok;
  neg.tag_id = -1;
  EXPECT_THROW(neg.validate(), InvalidArgument);
  auto nan = ok;
  nan.corners[2].u = std::nan("");
  EXPECT_THROW(nan.validate(), InvalidArgument);
  TagObservation flat{0, {{{0, 0}, {1, 1}, {2, 2}, {3, 3}}}};
  EXPECT_THROW(flat.validate(), InvalidArgument);
}

TEST(ObservationFile, LineRoundTrip) {
  const TagObservation obs{12, {{{100.125, 200.5}, {300.0, 201.0}, {299.75, 401.0}, {99.5, 400.0}}}};
  const auto line = format_observation_line(obs);
  EXPECT_EQ(line, "12 100.125 200.5 300 201 299.75 401 99.5 400");
  EXPECT_EQ(parse_observation_line(line), obs);
}

TEST(ObservationFile, ReadSkipsBlankAndCommentLines) {
  std::istringstream in("# frame 0\n\n3 1 2 3 4 5 6 7 8\n  4 1 2 3 4 5 6 7 9  \n");
  const auto obs = read_observations(in);
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs[0].tag_id, 3);
  EXPECT_EQ(obs[1].corners[3].v, 9.0);
  std::ostringstream out;
  write_observations(out, obs);
  EXPECT_EQ(out.str(), "3 1 2 3 4 5 6 7 8\n4 1 2 3 4 5 6 7 9\n");
}

TEST(ObservationFile, RejectsMalformedLines) {
  EXPECT_THROW(parse_observation_line("1 2 3"), FormatError);
  EXPECT_THROW(parse_observation_line("-1 1 2 3 4 5 6 7 8"), FormatError);
  EXPECT_THROW(parse_observation_line("1 1 2 3 4 5 6 7 x"), FormatError);
  EXPECT_THROW(parse_observation_line("1.5 1 2 3 4 5 6 7 8"), FormatError);
}
