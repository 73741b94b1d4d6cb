/* Copyright 2026 The DSTN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "dstn/transfer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "dstn/errors.hpp"
#include "dstn/image_io.hpp"
#include "dstn/serialize.hpp"
#include "dstn/synthetic.hpp"
#include "dstn/trainer.hpp"
#include "test_util.hpp"

namespace dstn {
namespace {

namespace fs = std::filesystem;

const GeneratorSpec kTiny{4, 1, 2, NormKind::kInstance};

void write_inputs(const fs::path& dir, int n, int size, uint64_t seed) {
  fs::create_directories(dir);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "painting_%04d.png", i);
    write_png(dir / name, textured_square(size, rng));
  }
}

TEST(TransferTest, ParsesDirection) {
  EXPECT_EQ(parse_direction("G"), Direction::kG);
  EXPECT_EQ(parse_direction("F"), Direction::kF);
  EXPECT_THROW(parse_direction("H"), ConfigError);
}

TEST(TransferTest, FlowerTestSetSizeGivesOneOutputPerInput) {
  testing::TempDir dir;
  write_inputs(dir / "in", 650, 32, 1);
  const Generator g(kTiny, 5);
  const auto files = collect_inputs(dir / "in");
  ASSERT_EQ(files.size(), 650u);
  const auto out = transfer_files(g, files, dir / "out", 32);
  ASSERT_EQ(out.size(), 650u);
  std::set<std::string> names;
  for (size_t i = 0; i < files.size(); ++i) {
    EXPECT_EQ(out[i].filename().string(), files[i].stem().string() + "_transferred.png");
    names.insert(out[i].filename().string());
  }
  EXPECT_EQ(names.size(), 650u);
  EXPECT_EQ(list_images(dir / "out").size(), 650u);
}

TEST(TransferTest, SingleImageDefaultSizeAndDeterminism) {
  testing::TempDir dir;
  std::mt19937_64 rng(3);
  write_png(dir / "one.jpg.png", textured_square(300, rng));
  const Generator g(kTiny, 6);
  TransferRequest req;
  EXPECT_EQ(req.out_size, 256);
  const auto a = transfer_files(g, {dir / "one.jpg.png"}, dir / "a", req.out_size);
  const auto b = transfer_files(g, {dir / "one.jpg.png"}, dir / "b", req.out_size);
  ASSERT_EQ(a.size(), 1u);
  const Raster r = decode_image(a[0]);
  EXPECT_EQ(r.width, 256);
  EXPECT_EQ(r.height, 256);
  EXPECT_EQ(r.channels, 3);
  EXPECT_EQ(read_file(a[0]), read_file(b[0]));
}

TEST(TransferTest, ThroughCheckpointBothDirections) {
  testing::TempDir dir;
  write_inputs(dir / "in", 3, 32, 2);
  TrainConfig c;
  c.generator = kTiny;
  c.discriminator = {4, 2, NormKind::kInstance};
  c.seed = 4;
  auto state = TrainState::create(c);
  save_checkpoint(*state, c, "", dir / "ck.dstn");

  TransferRequest req{dir / "ck.dstn", Direction::kG, dir / "in", dir / "g", 32, true};
  const auto g_out = transfer(req);
  req.direction = Direction::kF;
  req.out_dir = dir / "f";
  const auto f_out = transfer(req);
  ASSERT_EQ(g_out.size(), 3u);
  ASSERT_EQ(f_out.size(), 3u);
  EXPECT_NE(read_file(g_out[0]), read_file(f_out[0]));

  // Same as running the generator directly.
  const auto direct = transfer_files(state->g, collect_inputs(dir / "in"), dir / "d", 32);
  EXPECT_EQ(read_file(direct[1]), read_file(g_out[1]));

  req.checkpoint = dir / "missing.dstn";
  EXPECT_THROW(transfer(req), CheckpointError);
}

TEST(TransferTest, UndecodableInputStrictVersusLenient) {
  testing::TempDir dir;
  write_inputs(dir / "in", 2, 32, 3);
  std::ofstream(dir / "in" / "broken.png") << "garbage";
  const Generator g(kTiny, 1);
  const auto files = collect_inputs(dir / "in");
  ASSERT_EQ(files.size(), 3u);
  EXPECT_THROW(transfer_files(g, files, dir / "strict", 32, true), LoadError);
  EXPECT_EQ(transfer_files(g, files, dir / "lenient", 32, false).size(), 2u);
}

TEST(TransferTest, RejectsEmptyAndCollidingInputs) {
  testing::TempDir dir;
  fs::create_directories(dir / "empty");
  EXPECT_THROW(collect_inputs(dir / "empty"), LoadError);
  EXPECT_THROW(collect_inputs(dir / "nope"), LoadError);
  write_inputs(dir / "in", 1, 32, 4);
  fs::copy_file(dir / "in" / "painting_0000.png", dir / "in" / "painting_0000.jpg");
  const Generator g(kTiny, 1);
  EXPECT_THROW(transfer_files(g, collect_inputs(dir / "in"), dir / "out", 32), ConfigError);
}

// ------------------------------------------------------------ neighbors

// Independent scan: every similarity, full sort by (similarity desc, id asc).
// Ties here come only from duplicated rows, so rounding cannot reorder them.
std::vector<Neighbor> brute_force(std::span<const float> q, const std::vector<std::string>& ids,
                                  const Tensor& gallery, int k) {
  const int64_t d = gallery.dim(1);
  std::vector<Neighbor> all;
  for (size_t i = 0; i < ids.size(); ++i) {
    double dot = 0, qq = 0, gg = 0;
    for (int64_t j = 0; j < d; ++j) {
      const double a = q[j], b = gallery[static_cast<int64_t>(i) * d + j];
      dot += a * b;
      qq += a * a;
      gg += b * b;
    }
    const double s = (qq == 0 || gg == 0) ? 0.0 : dot / std::sqrt(qq * gg);
    all.push_back({ids[i], std::clamp(s, -1.0, 1.0)});
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.id < b.id);
  });
  all.resize(static_cast<size_t>(k));
  return all;
}

TEST(NeighborTest, OrthogonalGallery) {
  Tensor gallery({4, 4});
  for (int i = 0; i < 4; ++i) gallery[i * 4 + i] = 1.0f;
  const std::vector<float> q{0, 0, 3, 0};
  const auto r = rank_neighbors("q", q, {"item0", "item1", "item2", "item3"}, gallery, 4);
  EXPECT_EQ(r.ranked[0].id, "item2");
  EXPECT_EQ(r.ranked[0].similarity, 1.0);
  for (int i = 1; i < 4; ++i) EXPECT_EQ(r.ranked[i].similarity, 0.0);
  // Ties at 0 come back in id order.
  EXPECT_EQ(r.ranked[1].id, "item0");
  EXPECT_EQ(r.ranked[3].id, "item3");
}

TEST(NeighborTest, ScaledCopiesTieExactly) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> q(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> v(5), query(5);
    for (auto& x : v) x = static_cast<float>(q(rng));
    for (auto& x : query) x = static_cast<float>(q(rng));
    v[0] = v[0] == 0 ? 1.0f : v[0];
    const double base = cosine_similarity(query, v);
    for (float scale : {3.0f, 5.0f, 7.0f, 0.1f}) {
      std::vector<float> w(v);
      for (auto& x : w) x *= scale;
      // 0.1 is inexact in binary, so only the integer scales must tie bitwise.
      if (scale >= 1.0f) {
        EXPECT_EQ(cosine_similarity(query, w), base) << "scale " << scale;
      } else {
        EXPECT_NEAR(cosine_similarity(query, w), base, 1e-7);
      }
    }
  }
}

TEST(NeighborTest, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 100, d = 16;
    Tensor gallery = testing::random_tensor({m, d}, 1000 + trial);
    std::vector<std::string> ids;
    for (int i = 0; i < m; ++i) ids.push_back("g" + std::to_string((i * 37) % 100));
    // Duplicate rows under different ids force exact ties.
    for (int i = 0; i < 10; ++i) {
      std::copy_n(gallery.data() + i * d, d, gallery.data() + (50 + i) * d);
    }
    std::vector<float> q(d);
    std::copy_n(gallery.data() + (trial % 10) * d, d, q.data());
    if (trial % 2) {
      for (auto& v : q) v += 0.05f * std::uniform_real_distribution<float>(-1, 1)(rng);
    }
    for (int k : {1, 5, 100}) {
      const auto got = rank_neighbors("q", q, ids, gallery, k);
      const auto want = brute_force(q, ids, gallery, k);
      ASSERT_EQ(got.ranked.size(), want.size());
      for (size_t i = 0; i < want.size(); ++i) {
        ASSERT_EQ(got.ranked[i].id, want[i].id) << "trial " << trial << " rank " << i;
        ASSERT_NEAR(got.ranked[i].similarity, want[i].similarity, 1e-12);
      }
    }
  }
}

TEST(NeighborTest, RankingIsScaleInvariant) {
  const Tensor gallery = testing::random_tensor({100, 8}, 5);
  std::vector<std::string> ids;
  for (int i = 0; i < 100; ++i) ids.push_back(std::to_string(1000 + i));
  const Tensor q = testing::random_tensor({8}, 6);
  const auto base = rank_neighbors("q", q.values(), ids, gallery, 100);
  for (float c : {0.001f, 3.0f, 250.0f}) {
    Tensor scaled = gallery;
    for (float& v : scaled.values()) v *= c;
    const auto r = rank_neighbors("q", q.values(), ids, scaled, 100);
    for (size_t i = 0; i < 100; ++i) ASSERT_EQ(r.ranked[i].id, base.ranked[i].id);
  }
}

TEST(NeighborTest, SortedAndBounded) {
  const Tensor gallery = testing::random_tensor({30, 5}, 8);
  std::vector<std::string> ids;
  for (int i = 0; i < 30; ++i) ids.push_back("x" + std::to_string(i));
  const Tensor q = testing::random_tensor({5}, 9);
  const auto r = rank_neighbors("q", q.values(), ids, gallery, 30);
  for (size_t i = 0; i < r.ranked.size(); ++i) {
    EXPECT_GE(r.ranked[i].similarity, -1.0);
    EXPECT_LE(r.ranked[i].similarity, 1.0);
    if (i) {
      EXPECT_GE(r.ranked[i - 1].similarity, r.ranked[i].similarity);
    }
  }
  EXPECT_THROW(rank_neighbors("q", q.values(), ids, gallery, 31), ConfigError);
  EXPECT_THROW(rank_neighbors("q", q.values(), ids, gallery, 0), ConfigError);
}

TEST(NeighborTest, JsonExport) {
  Tensor gallery({2, 2});
  gallery[0] = 1.0f;
  gallery[3] = 1.0f;
  const std::vector<float> q{1, 0};
  const auto j = rank_neighbors("query.png", q, {"a", "b"}, gallery, 2).to_json();
  EXPECT_EQ(j["query"], "query.png");
  EXPECT_EQ(j["k"], 2);
  EXPECT_EQ(j["neighbors"][0]["id"], "a");
  EXPECT_EQ(j["neighbors"][0]["similarity"], 1.0);
  EXPECT_EQ(j["neighbors"][1]["similarity"], 0.0);
}

TEST(NeighborTest, EndToEndSelfIsRankOne) {
  testing::TempDir dir;
  write_toy_domains(dir / "toy", 6, 0, 32, 3);
  write_standin_vgg16(dir / "vgg.dstn", 1, "relu2_2", {4, 8, 16, 16, 16});
  const auto ex = FeatureExtractor::load({"vgg16", "relu2_2", dir / "vgg.dstn"});
  const fs::path gallery = dir / "toy" / "train" / "Y";
  const fs::path query = gallery / "circle_0003.png";
  const NeighborResult r = nearest_neighbors(query, gallery, 3, ex, 32);
  ASSERT_EQ(r.ranked.size(), 3u);
  EXPECT_EQ(r.ranked[0].id, "circle_0003.png");
  EXPECT_NEAR(r.ranked[0].similarity, 1.0, 1e-9);
  EXPECT_THROW(nearest_neighbors(query, gallery, 7, ex, 32), ConfigError);
}

}  // namespace
}  // namespace dstn
