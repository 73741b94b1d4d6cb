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
#include "dstn/data.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "test_util.hpp"

namespace dstn {
namespace {

namespace fs = std::filesystem;

Raster solid(int w, int h, int channels, uint8_t v) {
  return Raster{w, h, channels, std::vector<uint8_t>(static_cast<size_t>(w) * h * channels, v)};
}

Raster noise(int w, int h, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Raster r{w, h, 3, {}};
  r.pixels.resize(static_cast<size_t>(w) * h * 3);
  for (auto& p : r.pixels) p = static_cast<uint8_t>(rng() & 0xff);
  return r;
}

void touch(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << "";
}

class DataTest : public ::testing::Test {
 protected:
  // <root>/train/{X,Y} with real PNGs of the given counts.
  fs::path make_dataset(int nx, int ny, int size = 32) {
    const fs::path root = dir_ / "data";
    for (int i = 0; i < nx; ++i) {
      fs::create_directories(root / "train/X");
      write_png(root / "train/X" / ("p" + std::to_string(i) + ".png"), noise(size, size, i));
    }
    for (int i = 0; i < ny; ++i) {
      fs::create_directories(root / "train/Y");
      write_png(root / "train/Y" / ("n" + std::to_string(i) + ".png"),
                noise(size, size, 100 + i));
    }
    return root;
  }

  testing::TempDir dir_;
};

TEST_F(DataTest, ManifestCountsAndOrdering) {
  const fs::path root = dir_ / "fixture";
  for (const char* name : {"c.png", "a.png", "b.jpg"}) touch(root / "train/X" / name);
  for (const char* name : {"z.png", "y.jpeg"}) touch(root / "train/Y" / name);
  touch(root / "train/Y" / "notes.txt");
  DatasetManifest m = load_manifest(root, Split::kTrain);
  EXPECT_EQ(m.count_x(), 3u);
  EXPECT_EQ(m.count_y(), 2u);
  EXPECT_TRUE(std::is_sorted(m.domain_x.begin(), m.domain_x.end()));
  EXPECT_EQ(m.domain_x.front().filename(), "a.png");
  EXPECT_EQ(m.domain_y.front().filename(), "y.jpeg");
}

TEST_F(DataTest, FlowerTrainLayoutCounts) {
  const fs::path root = dir_ / "flower";
  for (int i = 0; i < 2285; ++i) touch(root / "train/X" / (std::to_string(i) + ".jpg"));
  for (int i = 0; i < 3546; ++i) touch(root / "train/Y" / (std::to_string(i) + ".jpg"));
  DatasetManifest m = load_manifest(root, Split::kTrain);
  EXPECT_EQ(m.count_x(), 2285u);
  EXPECT_EQ(m.count_y(), 3546u);
}

TEST_F(DataTest, EmptyOrMissingDomainIsError) {
  const fs::path root = dir_ / "bad";
  touch(root / "train/X/a.png");
  fs::create_directories(root / "train/Y");
  EXPECT_THROW(load_manifest(root, Split::kTrain), LoadError);
  try {
    load_manifest(root, Split::kTest);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("test"), std::string::npos);
  }
}

TEST_F(DataTest, ManifestJsonRoundTrip) {
  DatasetManifest m = load_manifest(make_dataset(3, 2), Split::kTrain);
  const nlohmann::json j = m.to_json();
  EXPECT_EQ(j["counts"]["X"], 3);
  EXPECT_EQ(j["split"], "train");
  DatasetManifest back = DatasetManifest::from_json(j);
  EXPECT_EQ(back.domain_x, m.domain_x);
  EXPECT_EQ(back.domain_y, m.domain_y);
  nlohmann::json tampered = j;
  tampered["counts"]["Y"] = 5;
  EXPECT_THROW(DatasetManifest::from_json(tampered), LoadError);
  nlohmann::json overlap = j;
  overlap["domain_y"][0] = j["domain_x"][0];
  EXPECT_THROW(DatasetManifest::from_json(overlap), LoadError);
}

TEST(PreprocessTest, ShapeAndNormalizationEndpoints) {
  std::mt19937_64 rng(1);
  const PreprocessSpec spec = PreprocessSpec::test(256);
  EXPECT_EQ(preprocess(noise(512, 512, 1), spec, rng).shape(), (Shape{3, 256, 256}));
  const Tensor black = preprocess(solid(300, 200, 3, 0), spec, rng);
  const Tensor white = preprocess(solid(300, 200, 3, 255), spec, rng);
  for (float v : black.values()) ASSERT_EQ(v, -1.0f);
  for (float v : white.values()) ASSERT_EQ(v, 1.0f);
}

TEST(PreprocessTest, GrayReplicatedAlphaDropped) {
  std::mt19937_64 rng(1);
  const PreprocessSpec spec = PreprocessSpec::test(32);
  const Tensor gray = preprocess(solid(32, 32, 1, 51), spec, rng);
  for (float v : gray.values()) ASSERT_FLOAT_EQ(v, 51.0f / 127.5f - 1.0f);
  Raster rgba = solid(32, 32, 4, 255);
  for (size_t i = 3; i < rgba.pixels.size(); i += 4) rgba.pixels[i] = 0;
  const Tensor rgb = preprocess(rgba, spec, rng);
  for (float v : rgb.values()) ASSERT_EQ(v, 1.0f);
  EXPECT_THROW(preprocess(solid(8, 8, 2, 0), spec, rng), ShapeError);
}

TEST(PreprocessTest, DeterministicModesDoNotConsumeRng) {
  const Raster img = noise(80, 48, 3);
  for (CropMode mode : {CropMode::kNone, CropMode::kCenter}) {
    PreprocessSpec spec{32, mode, 1.07, false};
    std::mt19937_64 a(7), b(7);
    const Tensor t1 = preprocess(img, spec, a);
    EXPECT_EQ(t1, preprocess(img, spec, b));
    EXPECT_EQ(a(), std::mt19937_64(7)());
  }
  PreprocessSpec random = PreprocessSpec::train(32);
  std::mt19937_64 a(7), b(7);
  EXPECT_EQ(preprocess(img, random, a), preprocess(img, random, b));
  EXPECT_NE(a(), std::mt19937_64(7)());
}

TEST(PreprocessTest, RoundTripIsIdempotentAtOutSize) {
  std::mt19937_64 rng(2);
  const PreprocessSpec spec = PreprocessSpec::test(64);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const Tensor once = preprocess(noise(64, 64, seed), spec, rng);
    const Tensor twice = preprocess(denormalize(once), spec, rng);
    for (int64_t i = 0; i < once.numel(); ++i) {
      ASSERT_LT(std::fabs(once[i] - twice[i]), 2.0f / 255.0f);
    }
  }
}

TEST(PreprocessTest, InvalidOutSize) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(preprocess(noise(8, 8, 1), PreprocessSpec::test(30), rng), ConfigError);
}

TEST(EpochPlanTest, CoversEveryXOnce) {
  std::mt19937_64 rng(3);
  for (size_t nx : {1u, 3u, 7u, 50u}) {
    for (size_t ny : {1u, 2u, 50u}) {
      for (int batch : {1, 2, 4}) {
        EpochPlan plan = plan_epoch(nx, ny, batch, rng);
        std::multiset<size_t> xs;
        for (size_t b = 0; b < plan.x_batches.size(); ++b) {
          ASSERT_EQ(plan.x_batches[b].size(), plan.y_batches[b].size());
          xs.insert(plan.x_batches[b].begin(), plan.x_batches[b].end());
          for (size_t y : plan.y_batches[b]) ASSERT_LT(y, ny);
        }
        std::multiset<size_t> expected;
        for (size_t i = 0; i < nx; ++i) expected.insert(i);
        EXPECT_EQ(xs, expected);
      }
    }
  }
  EXPECT_THROW(plan_epoch(3, 2, 0, rng), ConfigError);
}

TEST_F(DataTest, SamplerEpochIsPermutationOfX) {
  UnpairedSampler sampler(load_manifest(make_dataset(3, 2), Split::kTrain), 1,
                          PreprocessSpec::train(32));
  std::mt19937_64 rng(4);
  sampler.begin_epoch(rng);
  std::vector<size_t> seen;
  UnpairedBatch b;
  while (sampler.next(rng, b)) {
    ASSERT_EQ(b.x.size(), 1);
    seen.push_back(b.x_indices[0]);
    EXPECT_EQ(b.x.domain, Domain::kPaintings);
    EXPECT_EQ(b.y.domain, Domain::kNatural);
    EXPECT_NO_THROW(b.x.validate());
  }
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, (std::vector<size_t>{0, 1, 2}));
}

TEST_F(DataTest, SamplerRemainderBatch) {
  UnpairedSampler sampler(load_manifest(make_dataset(3, 2), Split::kTrain), 2,
                          PreprocessSpec::train(32));
  std::mt19937_64 rng(5);
  sampler.begin_epoch(rng);
  std::vector<int64_t> sizes;
  UnpairedBatch b;
  while (sampler.next(rng, b)) sizes.push_back(b.x.size());
  EXPECT_EQ(sizes, (std::vector<int64_t>{2, 1}));
  EXPECT_EQ(sampler.batches_per_epoch(), 2u);
}

TEST_F(DataTest, SamplerIsDeterministicUnderSeed) {
  const DatasetManifest m = load_manifest(make_dataset(4, 3), Split::kTrain);
  auto stream = [&](uint64_t seed) {
    UnpairedSampler sampler(m, 1, PreprocessSpec::train(32));
    std::mt19937_64 rng(seed);
    std::vector<std::string> ids;
    std::vector<Tensor> data;
    for (int epoch = 0; epoch < 2; ++epoch) {
      sampler.begin_epoch(rng);
      UnpairedBatch b;
      while (sampler.next(rng, b)) {
        ids.push_back(b.x.ids[0] + "|" + b.y.ids[0]);
        data.push_back(b.x.data);
      }
    }
    return std::make_pair(ids, data);
  };
  EXPECT_EQ(stream(11), stream(11));
  EXPECT_NE(stream(11).first, stream(12).first);
}

TEST_F(DataTest, LenientSamplerSkipsUndecodable) {
  const fs::path root = make_dataset(2, 2);
  std::ofstream(root / "train/X/broken.png") << "not an image";
  const DatasetManifest m = load_manifest(root, Split::kTrain);
  ASSERT_EQ(m.count_x(), 3u);

  std::mt19937_64 rng(6);
  UnpairedSampler strict(m, 3, PreprocessSpec::train(32), true);
  strict.begin_epoch(rng);
  UnpairedBatch b;
  EXPECT_THROW(strict.next(rng, b), LoadError);

  UnpairedSampler lenient(m, 3, PreprocessSpec::train(32), false);
  lenient.begin_epoch(rng);
  ASSERT_TRUE(lenient.next(rng, b));
  EXPECT_EQ(b.x.size(), 2);
}

TEST_F(DataTest, SampleUnpairedNeedsTrainSplit) {
  DatasetManifest m = load_manifest(make_dataset(2, 2), Split::kTrain);
  std::mt19937_64 rng(8);
  auto [x, y] = sample_unpaired(m, 2, PreprocessSpec::train(32), rng);
  EXPECT_EQ(x.size(), 2);
  EXPECT_EQ(y.size(), 2);
  m.split = Split::kTest;
  EXPECT_THROW(sample_unpaired(m, 2, PreprocessSpec::train(32), rng), ConfigError);
  EXPECT_THROW(sample_unpaired(m, 0, PreprocessSpec::train(32), rng), ConfigError);
}

}  // namespace
}  // namespace dstn
