#include <doctest.h>

#include <filesystem>
#include <string>

#include "oracles.hpp"
#include "spectralprior/config.hpp"
#include "spectralprior/error.hpp"
#include "spectralprior/image.hpp"
#include "spectralprior/record_io.hpp"
#include "spectralprior/task.hpp"

using namespace spectralprior;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

io::ImageBuffer random_image(std::size_t w, std::size_t h, std::size_t c, Rng& rng) {
  io::ImageBuffer b{w, h, c, {}};
  for (std::size_t i = 0; i < w * h * c; ++i) b.samples.push_back(static_cast<std::uint8_t>(rng.next_u64() & 0xFF));
  return b;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("spectralprior_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("2x2 binary greymap") {
  auto data = bytes("P5\n2 2\n255\n");
  data.insert(data.end(), {0, 128, 255, 64});
  const auto img = io::decode_image(data);
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.channels == 1);
  const auto t = img.to_tensor();
  CHECK(t.shape() == Shape{1, 2, 2});
  CHECK(t.storage() == std::vector<double>{0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0});
}

TEST_CASE("header comments and whitespace") {
  auto data = bytes("P6 # colour\n# another\n1 1 255\n");
  data.insert(data.end(), {1, 2, 3});
  const auto img = io::decode_image(data);
  CHECK(img.channels == 3);
  CHECK(img.samples == std::vector<std::uint8_t>{1, 2, 3});
}

TEST_CASE("encode and decode round trips are bit-identical") {
  Rng rng(1);
  for (auto fmt : {io::ImageFormat::pgm, io::ImageFormat::ppm, io::ImageFormat::png}) {
    const std::size_t c = fmt == io::ImageFormat::pgm ? 1 : (fmt == io::ImageFormat::ppm ? 3 : 1);
    for (std::size_t channels : {c, fmt == io::ImageFormat::png ? std::size_t{3} : c}) {
      const auto img = random_image(13, 7, channels, rng);
      CHECK(io::decode_image(io::encode_image(img, fmt)) == img);
    }
  }
  const auto dir = temp_dir("roundtrip");
  const auto img = random_image(9, 5, 3, rng);
  io::save_image(img, dir / "a.png");
  CHECK(io::load_image(dir / "a.png") == img);
  io::save_image(img, dir / "a.ppm");
  CHECK(io::load_image(dir / "a.ppm") == img);
  CHECK(io::ImageBuffer::from_tensor(img.to_tensor()) == img);
  CHECK_THROWS_AS(io::save_image(img, dir / "a.pgm"), ConfigError);
  CHECK_THROWS_AS(io::save_image(img, dir / "a.bmp"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("malformed files report byte offsets") {
  const auto expect_offset = [](const std::vector<std::uint8_t>& data, std::size_t offset) {
    try {
      io::decode_image(data);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(e.offset() == offset);
    }
  };
  expect_offset(bytes("P5\n2 2\n65535\n"), 7);
  expect_offset(bytes("P5\n2 x\n255\n"), 5);
  expect_offset(bytes("P7\n"), 1);
  expect_offset(bytes("GIF89a"), 0);
  auto truncated = bytes("P5\n2 2\n255\n");
  truncated.push_back(1);
  expect_offset(truncated, 12);

  Rng rng(2);
  auto png = io::encode_image(random_image(4, 4, 1, rng), io::ImageFormat::png);
  auto depth16 = png;
  depth16[8 + 8 + 8] = 16;  // IHDR bit depth
  CHECK_THROWS_AS(io::decode_image(depth16), IoError);
  auto corrupt = png;
  corrupt[40] ^= 0xFF;
  CHECK_THROWS_AS(io::decode_image(corrupt), IoError);
  CHECK_THROWS_AS(io::load_image("/nonexistent/image.png"), IoError);
}

TEST_CASE("padding to powers of two") {
  Rng rng(3);
  const auto x = oracle::random_tensor({3, 100, 80}, rng, 0.0, 1.0);
  const auto p = io::pad_to_power_of_two(x);
  CHECK(p.image.shape() == Shape{3, 128, 128});
  CHECK(p.mask.shape() == Shape{1, 128, 128});
  CHECK(p.height == 100);
  CHECK(p.width == 80);
  double covered = 0.0;
  for (std::size_t y = 0; y < 128; ++y)
    for (std::size_t i = 0; i < 128; ++i) {
      const double m = p.mask.at(0, y, i);
      covered += m;
      CHECK(m == (y < 100 && i < 80 ? 1.0 : 0.0));
    }
  CHECK(covered == 8000.0);
  CHECK(io::crop(p.image, 100, 80) == x);
  // Mirror without repeating the edge sample.
  CHECK(p.image.at(1, 100, 5) == x.at(1, 98, 5));
  CHECK(p.image.at(2, 7, 80) == x.at(2, 7, 78));
  CHECK(io::pad_to_power_of_two(oracle::scene(64)).image == oracle::scene(64));

  const auto dir = temp_dir("pad");
  io::write_pad_sidecar(dir / "x.pad", p);
  CHECK(io::read_pad_sidecar(dir / "x.pad") == std::pair<std::size_t, std::size_t>{100, 80});
  fs::remove_all(dir);
}

TEST_CASE("configuration grammar") {
  const auto kv = io::parse_key_values("# comment\n\n  seed = 3 \nloss.kind=dsp_complex\ngenerator.channels = 8, 16\n");
  CHECK(kv.at("seed") == "3");
  CHECK(kv.at("loss.kind") == "dsp_complex");
  CHECK_THROWS_AS(io::parse_key_values("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_key_values("no equals sign\n"), ConfigError);
  CHECK_THROWS_AS(io::parse_key_values("bad key=1\n"), ConfigError);
  try {
    io::parse_key_values("a=1\n\nb c\n", "x.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:3") != std::string::npos);
  }
  CHECK(io::parse_key_values(io::format_key_values(kv)) == kv);
}

TEST_CASE("task configuration round trip and validation") {
  io::KeyValues kv{{"task", "superres"},
                   {"input", "in.png"},
                   {"factor", "8"},
                   {"generator.channels", "8,16,32"},
                   {"generator.skip_channels", "2,2,2"},
                   {"generator.depth", "3"},
                   {"optimizer.lr", "0.005"},
                   {"loss.band_weights", "1,0.5"},
                   {"hash.input", "0123"}};
  const auto cfg = io::task_config_from(kv);
  CHECK(cfg.task == io::Task::superres);
  CHECK(cfg.factor == 8);
  CHECK(cfg.generator.channels == std::vector<std::size_t>{8, 16, 32});
  CHECK(cfg.optimizer.lr == 0.005);
  CHECK(cfg.resolved_sigma() == 0.0);
  CHECK(cfg.resolved_noise_seed() == cfg.seed);
  cfg.validate();
  const auto back = io::task_config_from(io::to_key_values(cfg));
  CHECK(io::to_key_values(back) == io::to_key_values(cfg));

  CHECK_THROWS_AS(io::task_config_from({{"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(io::task_config_from({{"seed", "-1"}}), ConfigError);
  CHECK_THROWS_AS(io::task_config_from({{"sigma", "nan"}}), ConfigError);
  CHECK_THROWS_AS(io::task_config_from({{"task", "deblur"}}), ConfigError);
  auto bad = cfg;
  bad.factor = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.task = io::Task::inpaint;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  io::TaskConfig d;
  d.input = "x.png";
  CHECK(d.resolved_sigma() == 25.0);
}

TEST_CASE("record CSV round trip") {
  optimize::RunRecord rec;
  for (std::size_t t = 0; t < 3; ++t) {
    optimize::LogEntry e;
    e.iteration = t * 50;
    e.loss = 1.0 / 3.0 + t;
    e.psnr = t == 2 ? std::numeric_limits<double>::infinity() : 20.123456789012345;
    e.clean_error = std::numeric_limits<double>::quiet_NaN();
    e.band_residuals = {0.1, 1e-300, 5e10};
    e.ms = 12.5 * t;
    rec.entries.push_back(e);
  }
  const auto text = io::record_csv(rec);
  CHECK(text.substr(0, text.find('\n')) == "iter,loss,psnr,clean_error,band_0,band_1,band_2");
  const auto back = io::parse_record_csv(text);
  REQUIRE(back.entries.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.entries[i].iteration == rec.entries[i].iteration);
    CHECK(back.entries[i].loss == rec.entries[i].loss);
    CHECK(back.entries[i].psnr == rec.entries[i].psnr);
    CHECK(std::isnan(back.entries[i].clean_error));
    CHECK(back.entries[i].band_residuals == rec.entries[i].band_residuals);
  }
  CHECK(io::record_csv(back) == text);
  const auto timed = io::record_csv(rec, true);
  CHECK(timed.substr(0, timed.find('\n')).ends_with(",ms"));
  CHECK(io::parse_record_csv(timed).entries[2].ms == 25.0);
  CHECK_THROWS_AS(io::parse_record_csv("iter,loss\n1,2\n"), IoError);
  CHECK_THROWS_AS(io::parse_record_csv("iter,loss,psnr,clean_error\n0,1,x,2\n"), IoError);
}

TEST_CASE("prepared tasks, manifests and reruns") {
  const auto dir = temp_dir("task");
  Rng rng(4);
  io::save_image(io::ImageBuffer::from_tensor(oracle::scene(16)), dir / "clean.pgm");
  Tensor odd({1, 12, 20});
  for (auto& v : odd.storage()) v = rng.uniform();
  io::save_image(io::ImageBuffer::from_tensor(odd), dir / "odd.pgm");

  io::TaskConfig cfg;
  cfg.input = dir / "clean.pgm";
  cfg.seed = 9;
  cfg.generator.depth = 2;
  cfg.generator.channels = {4, 4};
  cfg.generator.skip_channels = {2, 2};
  cfg.optimizer.iterations = 4;
  cfg.optimizer.log_every = 1;

  const auto a = io::prepare(cfg);
  CHECK(a.obs.y.shape() == Shape{1, 16, 16});
  CHECK_FALSE(a.padded);
  REQUIRE(a.obs.noise);
  const auto manifest = io::manifest(cfg, a);
  CHECK(manifest.contains("hash.input"));
  io::write_text(dir / "manifest.txt", io::format_key_values(manifest));

  const auto reread = io::load_key_values(dir / "manifest.txt");
  const auto cfg2 = io::task_config_from(reread);
  const auto b = io::prepare(cfg2);
  io::verify_hashes(reread, b);
  const auto csv1 = io::record_csv(optimize::run(a.run, a.obs));
  const auto csv2 = io::record_csv(optimize::run(b.run, b.obs));
  CHECK(csv1 == csv2);

  auto changed = reread;
  changed["hash.input"] = "ffffffffffffffff";
  CHECK_THROWS_AS(io::verify_hashes(changed, b), ConfigError);

  cfg.input = dir / "odd.pgm";
  const auto p = io::prepare(cfg);
  CHECK(p.padded);
  CHECK(p.obs.y.shape() == Shape{1, 16, 32});
  CHECK(p.out_height == 12);
  CHECK(p.out_width == 20);
  REQUIRE(p.run.metric_mask);
  for (std::size_t i = 0; i < p.obs.y.size(); ++i) {
    if ((*p.run.metric_mask)[i] == 0.0) CHECK((*p.obs.noise)[i] == 0.0);
  }

  cfg.task = io::Task::superres;
  cfg.factor = 8;
  cfg.input = dir / "clean.pgm";
  const auto s = io::prepare(cfg);
  CHECK(s.obs.op.in_shape() == Shape{1, 128, 128});
  CHECK(s.obs.y.shape() == Shape{1, 16, 16});
  CHECK(s.out_height == 128);

  cfg.task = io::Task::inpaint;
  CHECK_THROWS_AS(io::prepare(cfg), ConfigError);
  cfg.mask = dir / "clean.pgm";
  const auto ip = io::prepare(cfg);
  CHECK(ip.obs.op.kind() == degrade::OpKind::region_mask);
  CHECK(ip.hashes.contains("hash.mask"));
  fs::remove_all(dir);
}
