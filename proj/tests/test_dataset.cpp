#include <doctest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <sstream>

#include "syndecomp/dataset.hpp"
#include "syndecomp/error.hpp"

using namespace syndecomp;

namespace {

CsvSchema xy_schema() {
  CsvSchema s;
  s.covariate_columns = {"x"};
  return s;
}

std::string three_region_csv() {
  std::ostringstream os;
  os << "region,y,x\n";
  for (int r = 0; r < 3; ++r) {
    for (int i = 0; i < 10; ++i) os << r << ',' << (r + 0.1 * i) << ',' << (0.05 * i) << '\n';
  }
  return os.str();
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::numeric;
}

}  // namespace

TEST_CASE("three regions of ten rows group into target plus two sources") {
  std::istringstream in(three_region_csv());
  const auto data = parse_csv(in, xy_schema());
  CHECK(data.source_count() == 2);
  CHECK(data.target.size() == 10);
  CHECK(data.target.region_id == "0");
  CHECK(data.sources[0].region_id == "1");
  CHECK(data.sources[1].region_id == "2");
  CHECK(data.sources[1].outcomes(3) == doctest::Approx(2.3));
}

TEST_CASE("blank outcome cell is a parse error naming the row") {
  std::istringstream in("region,y,x\n0,1,2\n0,,3\n1,1,1\n1,2,2\n");
  try {
    parse_csv(in, xy_schema());
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
}

TEST_CASE("non-numeric cell is a parse error") {
  std::istringstream in("region,y,x\n0,1,abc\n0,2,3\n1,1,1\n1,2,2\n");
  CHECK(kind_of([&] { parse_csv(in, xy_schema()); }) == ErrorKind::parse);
}

TEST_CASE("single region is rejected") {
  std::istringstream in("region,y,x\n0,1,2\n0,2,3\n");
  try {
    parse_csv(in, xy_schema());
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
    CHECK(std::string(e.what()).find("no source regions") != std::string::npos);
  }
}

TEST_CASE("missing column is a schema error") {
  std::istringstream in("region,y\n0,1\n");
  CHECK(kind_of([&] { parse_csv(in, xy_schema()); }) == ErrorKind::schema);
}

TEST_CASE("region with a single row is rejected") {
  std::istringstream in("region,y,x\n0,1,2\n0,2,3\n1,1,1\n");
  CHECK(kind_of([&] { parse_csv(in, xy_schema()); }) == ErrorKind::validation);
}

TEST_CASE("threshold must be constant within a region") {
  CsvSchema s = xy_schema();
  s.threshold_column = "w";
  std::istringstream ok("region,y,x,w\n0,1,2,5\n0,2,3,5\n1,1,1,6\n1,2,2,6\n");
  const auto data = parse_csv(ok, s);
  CHECK(*data.target.threshold == 5.0);
  CHECK(*data.sources[0].threshold == 6.0);
  std::istringstream bad("region,y,x,w\n0,1,2,5\n0,2,3,4\n1,1,1,6\n1,2,2,6\n");
  CHECK(kind_of([&] { parse_csv(bad, s); }) == ErrorKind::validation);
}

TEST_CASE("empty index outcome cells become unobserved") {
  CsvSchema s = xy_schema();
  s.index_outcome_column = "lw";
  std::istringstream in("region,y,x,lw\n0,1,2,\n0,2,3,1.5\n1,1,1,0.5\n1,2,2,0.7\n");
  const auto data = parse_csv(in, s);
  CHECK(std::isnan((*data.target.index_outcomes)(0)));
  CHECK((*data.target.index_outcomes)(1) == 1.5);
}

TEST_CASE("CSV round trip is bit exact") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(0.0, 1e3);
  MultiRegionDataset d;
  auto region = [&](const std::string& id) {
    RegionSample r;
    r.region_id = id;
    r.outcomes.resize(7);
    r.covariates.resize(7, 2);
    for (int i = 0; i < 7; ++i) {
      r.outcomes(i) = z(rng) * 1e-7;
      r.covariates(i, 0) = z(rng);
      r.covariates(i, 1) = 1.0 / 3.0 + i;
    }
    return r;
  };
  d.target = region("0");
  d.sources = {region("1"), region("2"), region("10")};
  CsvSchema s;
  s.covariate_columns = {"a", "b"};
  std::stringstream buf;
  write_csv(d, buf, s);
  const auto back = parse_csv(buf, s);
  CHECK((back.target.outcomes.array() == d.target.outcomes.array()).all());
  REQUIRE(back.sources.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back.sources[k].region_id == d.sources[k].region_id);
    CHECK((back.sources[k].covariates.array() == d.sources[k].covariates.array()).all());
    CHECK((back.sources[k].outcomes.array() == d.sources[k].outcomes.array()).all());
  }
}

TEST_CASE("row order does not change the grouped dataset beyond within-region order") {
  std::vector<std::string> rows;
  std::istringstream src(three_region_csv());
  std::string line;
  std::getline(src, line);
  const std::string header = line;
  while (std::getline(src, line)) rows.push_back(line);
  std::mt19937_64 rng(3);
  std::shuffle(rows.begin(), rows.end(), rng);
  std::ostringstream os;
  os << header << '\n';
  for (const auto& r : rows) os << r << '\n';
  std::istringstream a(three_region_csv());
  std::istringstream b(os.str());
  const auto d1 = parse_csv(a, xy_schema());
  const auto d2 = parse_csv(b, xy_schema());
  REQUIRE(d1.source_count() == d2.source_count());
  auto sorted_sum = [](const RegionSample& r) {
    std::vector<double> v(r.outcomes.data(), r.outcomes.data() + r.outcomes.size());
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted_sum(d1.target) == sorted_sum(d2.target));
  for (std::size_t k = 0; k < d1.source_count(); ++k) {
    CHECK(d1.sources[k].region_id == d2.sources[k].region_id);
    CHECK(sorted_sum(d1.sources[k]) == sorted_sum(d2.sources[k]));
  }
}

TEST_CASE("numeric region ids order naturally") {
  CHECK(region_id_less("2", "10"));
  CHECK_FALSE(region_id_less("10", "2"));
  CHECK(region_id_less("TX", "WA"));
}

TEST_CASE("empty config gives the defaults") {
  const auto c = parse_config("{}");
  CHECK(c.alpha == 0.05);
  CHECK(c.kappa == 0.005);
  CHECK(c.bootstrap_draws == 200);
  CHECK(c.truncation_constant == 0.05);
  CHECK(c.simplex_grid_size == 5000);
  CHECK_FALSE(c.robust_mode);
}

TEST_CASE("config validation") {
  CHECK(kind_of([] { parse_config(R"({"alpha":0.1,"kappa":0.2})"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse_config(R"({"bootstrap_draws":0})"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse_config(R"({"truncation_constant":-1})"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse_config(R"({"bogus":1})"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse_config(R"({"alpha":"x"})"); }) == ErrorKind::validation);
  CHECK(kind_of([] { parse_config("{"); }) == ErrorKind::parse);
  CHECK(parse_config(R"({"bootstrap_draws":999})").bootstrap_draws == 999);
}

TEST_CASE("missing config file is a usage error") {
  CHECK(kind_of([] { load_config("/nonexistent/config.json"); }) == ErrorKind::usage);
}

TEST_CASE("policy validation") {
  CHECK(kind_of([] { validate_policy(IndexThresholdPolicy{0.0}, 1); }) == ErrorKind::validation);
  CovariateShiftPolicy p;
  p.loadings = Eigen::VectorXd::Ones(2);
  p.shift = Eigen::VectorXd::Ones(1);
  CHECK(kind_of([&] { validate_policy(p, 2); }) == ErrorKind::validation);
  IdentityIndexPolicy q;
  q.column = 3;
  CHECK(kind_of([&] { validate_policy(q, 2); }) == ErrorKind::validation);
}
