#include <cstdio>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "sgmm/csv.hpp"
#include "sgmm/errors.hpp"

using namespace sgmm;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& text) const {
    std::ofstream out(path, std::ios::binary);
    out << text;
  }
};

CsvSchema plain_schema(int p, int q) {
  CsvSchema s;
  s.y_col = "y";
  for (int j = 1; j <= p; ++j) s.x_cols.push_back("x" + std::to_string(j));
  for (int j = 1; j <= q; ++j) s.z_cols.push_back("z" + std::to_string(j));
  return s;
}

}  // namespace

TEST_CASE("csv: write and read round-trip bit for bit") {
  Dataset ds;
  ds.Xt.resize(2, 6);
  ds.Zt.resize(3, 6);
  ds.y.resize(6);
  std::mt19937_64 rng(90);
  std::normal_distribution<double> normal;
  for (Index j = 0; j < 6; ++j) {
    ds.y(j) = normal(rng);
    ds.Xt.col(j) = Vector::NullaryExpr(2, [&](Index) { return normal(rng); });
    ds.Zt.col(j) = Vector::NullaryExpr(3, [&](Index) { return normal(rng); });
  }
  // awkward exact values
  ds.y(0) = 0.1;
  ds.y(1) = 1.0 / 3.0;
  ds.Xt(0, 0) = 1e-300;
  ds.Xt(1, 0) = -1e300;
  ds.Zt(0, 0) = 42.0;
  ds.Zt(1, 0) = -0.0;

  const TempFile tf("sgmm_csv_roundtrip.csv");
  write_csv(tf.path, ds);
  const std::vector<Observation> back = read_csv(tf.path, plain_schema(2, 3));
  REQUIRE(back.size() == 6);
  for (Index j = 0; j < 6; ++j) {
    const auto& o = back[static_cast<std::size_t>(j)];
    CHECK(o.y == ds.y(j));
    CHECK(o.x == ds.Xt.col(j));
    CHECK(o.z == ds.Zt.col(j));
  }
}

TEST_CASE("csv: stream and materialized reads agree") {
  const TempFile tf("sgmm_csv_stream.csv");
  tf.write("y,x1,z1,z2\n1,2,3,4\n5,6,7,8\n");
  const CsvSchema schema = plain_schema(1, 2);
  CsvStream stream(tf.path, schema);
  CHECK(stream.d_beta() == 1);
  CHECK(stream.d_g() == 2);
  const std::vector<Observation> all = read_csv(tf.path, schema);
  Observation obs;
  std::size_t i = 0;
  while (stream.next(obs)) {
    REQUIRE(i < all.size());
    CHECK(obs.y == all[i].y);
    CHECK(obs.x == all[i].x);
    CHECK(obs.z == all[i].z);
    ++i;
  }
  CHECK(i == 2);
  CHECK_FALSE(stream.next(obs));  // stays exhausted
}

TEST_CASE("csv: columns are picked by header name") {
  const TempFile tf("sgmm_csv_names.csv");
  tf.write("junk,z2,y,x1,z1,more\n9,20,1,2,10,9\n9,21,3,4,11,9\n");
  CsvSchema schema;
  schema.y_col = "y";
  schema.x_cols = {"x1"};
  schema.z_cols = {"z1", "z2"};  // declared order, not file order
  const std::vector<Observation> rows = read_csv(tf.path, schema);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].y == 1.0);
  CHECK(rows[0].x(0) == 2.0);
  CHECK(rows[0].z(0) == 10.0);
  CHECK(rows[0].z(1) == 20.0);
  CHECK(rows[1].z(1) == 21.0);
}

TEST_CASE("csv: windows line endings and padded cells") {
  const TempFile tf("sgmm_csv_crlf.csv");
  tf.write("y, x1 ,z1\r\n 1 ,2,3\r\n4, 5 , 6 \r\n");
  const std::vector<Observation> rows = read_csv(tf.path, plain_schema(1, 1));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].y == 1.0);
  CHECK(rows[0].x(0) == 2.0);
  CHECK(rows[1].z(0) == 6.0);
}

TEST_CASE("csv: ingest errors carry the line number") {
  const TempFile tf("sgmm_csv_bad.csv");

  tf.write("y,x1,z1\n1,2,3\n4,5\n");
  try {
    read_csv(tf.path, plain_schema(1, 1));
    FAIL("ragged row not rejected");
  } catch (const IngestError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  tf.write("y,x1,z1\n1,2,3\n4,abc,6\n");
  try {
    read_csv(tf.path, plain_schema(1, 1));
    FAIL("non-numeric cell not rejected");
  } catch (const IngestError& e) {
    CHECK(e.line == 3);
  }

  tf.write("y,x1,z1\n1,nan,3\n");
  try {
    read_csv(tf.path, plain_schema(1, 1));
    FAIL("non-finite value not rejected");
  } catch (const IngestError& e) {
    CHECK(e.line == 2);
  }

  tf.write("y,x1,z1\n1,2,3\n");
  try {
    CsvSchema missing = plain_schema(1, 1);
    missing.z_cols = {"z9"};
    read_csv(tf.path, missing);
    FAIL("missing column not rejected");
  } catch (const IngestError& e) {
    CHECK(e.line == 1);
  }
}

TEST_CASE("csv: schema shape rules") {
  const TempFile tf("sgmm_csv_shape.csv");
  tf.write("y,x1,x2,z1\n1,2,3,4\n");
  CsvSchema no_x;
  no_x.y_col = "y";
  no_x.z_cols = {"z1"};
  CHECK_THROWS_AS(CsvStream(tf.path, no_x), ConfigError);
  CsvSchema under;
  under.y_col = "y";
  under.x_cols = {"x1", "x2"};
  under.z_cols = {"z1"};
  CHECK_THROWS_AS(CsvStream(tf.path, under), ConfigError);
  CHECK_THROWS_AS(CsvStream("/tmp/does_not_exist_sgmm.csv", plain_schema(1, 1)),
                  ConfigError);
}

TEST_CASE("csv: header-only and empty files") {
  const TempFile tf("sgmm_csv_empty.csv");
  tf.write("y,x1,z1\n");
  CHECK(read_csv(tf.path, plain_schema(1, 1)).empty());
  tf.write("");
  CHECK_THROWS_AS(read_csv(tf.path, plain_schema(1, 1)), IngestError);
}

TEST_CASE("csv: clusters group contiguous ids") {
  const TempFile tf("sgmm_csv_cluster.csv");
  tf.write(
      "y,x1,z1,firm\n"
      "1,1,1,a\n"
      "2,2,2,a\n"
      "3,3,3,b\n"
      "4,4,4,c\n"
      "5,5,5,c\n"
      "6,6,6,c\n");
  CsvSchema schema = plain_schema(1, 1);
  schema.cluster_col = "firm";
  CsvStream stream(tf.path, schema);
  Cluster c;
  REQUIRE(stream.next_cluster(c));
  CHECK(c.members.size() == 2);
  CHECK(c.members[0].y == 1.0);
  REQUIRE(stream.next_cluster(c));
  CHECK(c.members.size() == 1);
  CHECK(c.members[0].y == 3.0);
  REQUIRE(stream.next_cluster(c));
  CHECK(c.members.size() == 3);
  CHECK(c.members[2].y == 6.0);
  CHECK_FALSE(stream.next_cluster(c));
}

TEST_CASE("csv: cluster ids may not reappear") {
  const TempFile tf("sgmm_csv_cluster_bad.csv");
  tf.write(
      "y,x1,z1,firm\n"
      "1,1,1,a\n"
      "2,2,2,b\n"
      "3,3,3,a\n");
  CsvSchema schema = plain_schema(1, 1);
  schema.cluster_col = "firm";
  CsvStream stream(tf.path, schema);
  Cluster c;
  REQUIRE(stream.next_cluster(c));
  try {
    stream.next_cluster(c);
    FAIL("reappearing cluster id not rejected");
  } catch (const IngestError& e) {
    CHECK(e.line == 4);
  }
}

TEST_CASE("csv: cluster mode needs a cluster column") {
  const TempFile tf("sgmm_csv_cluster_none.csv");
  tf.write("y,x1,z1\n1,2,3\n");
  CsvStream stream(tf.path, plain_schema(1, 1));
  Cluster c;
  CHECK_THROWS_AS(stream.next_cluster(c), ConfigError);
}
