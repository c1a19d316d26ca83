#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "oracles.hpp"
#include "spectralprior/image.hpp"
#include "spectralprior/record_io.hpp"

using namespace spectralprior;
namespace fs = std::filesystem;

namespace {

const std::string tiny = " --depth 2 --channels 4,4 --skip-channels 2,2 -q";

int run(const std::string& args) {
  const std::string cmd = std::string(SPECTRALPRIOR_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct Workdir {
  fs::path path;
  Workdir() : path(fs::temp_directory_path() / "spectralprior_cli") {
    fs::remove_all(path);
    fs::create_directories(path);
    io::save_image(io::ImageBuffer::from_tensor(oracle::scene(32)), path / "scene.pgm");
  }
  ~Workdir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("denoise runs reproduce byte for byte") {
  Workdir w;
  const auto common = " -i " + (w / "scene.pgm") + " --seed 3 --iterations 6 --log-every 2" + tiny;
  REQUIRE(run("denoise" + common + " -o " + (w / "a")) == 0);
  REQUIRE(run("denoise" + common + " -o " + (w / "b")) == 0);
  const auto a = io::read_text(w / "a/record.csv");
  CHECK(a == io::read_text(w / "b/record.csv"));
  CHECK(io::parse_record_csv(a).entries.size() == 4);
  CHECK(io::load_image(w / "a/reconstruction.pgm").width == 32);

  // Rerunning from the manifest alone gives the same record.
  REQUIRE(run("denoise --config " + (w / "a/manifest.txt") + " -o " + (w / "c")) == 0);
  CHECK(a == io::read_text(w / "c/record.csv"));
}

TEST_CASE("superres output size") {
  Workdir w;
  REQUIRE(run("superres -i " + (w / "scene.pgm") + " --factor 8 --iterations 1 -o " + (w / "sr") + tiny) == 0);
  const auto out = io::load_image(w / "sr/reconstruction.pgm");
  CHECK(out.width == 256);
  CHECK(out.height == 256);
}

TEST_CASE("exit codes") {
  Workdir w;
  CHECK(run("--help") == 0);
  CHECK(run("") == 2);
  CHECK(run("denoise -i " + (w / "scene.pgm") + " --lr -1" + tiny) == 2);
  CHECK(run("denoise -i " + (w / "scene.pgm") + " --set colour=red" + tiny) == 2);
  CHECK(run("superres -i " + (w / "scene.pgm") + " --factor 3" + tiny) == 2);
  CHECK(run("denoise -i " + (w / "missing.png") + tiny) == 4);
  io::write_text(w / "broken.pgm", "P5\n4 4\n255\n");
  CHECK(run("denoise -i " + (w / "broken.pgm") + tiny) == 4);
}

TEST_CASE("compare and report") {
  Workdir w;
  const auto common = " -i " + (w / "scene.pgm") + " --seed 1 --iterations 4 --log-every 1" + tiny;
  REQUIRE(run("compare" + common + " -o " + (w / "cmp")) == 0);
  CHECK(fs::exists(w / "cmp/dip/record.csv"));
  CHECK(fs::exists(w / "cmp/dsp/record.csv"));
  CHECK(fs::exists(w / "cmp/early_stopping_denoise_dsp_magnitude_s1.csv"));
  REQUIRE(run("report " + (w / "cmp/dsp") + " --window 2") == 0);
  CHECK(fs::exists(w / "cmp/dsp/ordering_denoise_dsp_magnitude_s1.csv"));
  CHECK(fs::exists(w / "cmp/dsp/stability_denoise_dsp_magnitude_s1.csv"));
  CHECK(run("report " + (w / "nowhere")) == 4);
}

TEST_CASE("bias-variance subcommand") {
  Workdir w;
  REQUIRE(run("bias-variance -i " + (w / "scene.pgm") + " -n 2 --iterations 2 -o " + (w / "bv") + tiny) == 0);
  CHECK(fs::exists(w / "bv/bias_variance_denoise_dsp_magnitude_s0_n2.csv"));
}
