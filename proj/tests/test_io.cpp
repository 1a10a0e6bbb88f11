#include <doctest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <unistd.h>

#include "petrecon/io.hpp"

using namespace petrecon;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("petrecon_io_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string le_doubles(std::initializer_list<double> vals) {
  std::string s;
  for (double v : vals) {
    unsigned char b[8];
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    s.append(reinterpret_cast<const char*>(b), 8);
  }
  return s;
}

void truncate_by(const fs::path& p, std::uintmax_t n) { fs::resize_file(p, fs::file_size(p) - n); }

}  // namespace

TEST_CASE("PIV1 header example") {
  TempDir tmp;
  const auto p = tmp.path / "ex.piv";
  write_bytes(p, "PIV1 2 2 1 4.0\n" + le_doubles({1.5, -2.0, 3.25, 1e-300}));
  const Volume v = io::read_volume(p);
  CHECK(v.grid() == ImageGrid{2, 2, 1, 4.0, 4.0});
  CHECK(v[0] == 1.5);
  CHECK(v[1] == -2.0);
  CHECK(v[2] == 3.25);
  CHECK(v[3] == 1e-300);
  CHECK(io::read_volume(p, 2.5).grid().slice_thickness == 2.5);
}

TEST_CASE("volume and sinogram round trips are bitwise") {
  TempDir tmp;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01(0.0, 1e3);
  Volume v(ImageGrid{5, 3, 2, 1.75, 1.75});
  for (auto& x : v.values()) x = n01(rng);
  v[0] = std::numeric_limits<double>::denorm_min();
  v[1] = -0.0;
  io::write_volume(tmp.path / "sub" / "v.piv", v);
  const Volume back = io::read_volume(tmp.path / "sub" / "v.piv");
  CHECK(std::memcmp(back.values().data(), v.values().data(), v.size() * 8) == 0);
  CHECK(back.grid() == v.grid());

  Sinogram s(2, 3, 4);
  for (auto& x : s.values()) x = n01(rng);
  io::write_sinogram(tmp.path / "s.psg", s);
  CHECK(io::read_sinogram(tmp.path / "s.psg") == s);
  CHECK(io::read_text(tmp.path / "s.psg").rfind("PSG1 2 3 4\n", 0) == 0);

  acquisition::MeanComponents bg{Sinogram(2, 3, 4, 0.5), Sinogram(2, 3, 4, 0.25)};
  io::write_acquisition(tmp.path / "a.psg", s, bg);
  CHECK(fs::exists(tmp.path / "a.psg.s"));
  CHECK(fs::exists(tmp.path / "a.psg.r"));
  const auto acq = io::read_acquisition(tmp.path / "a.psg");
  CHECK(acq.counts == s);
  CHECK(acq.background.scatter == bg.scatter);
  CHECK(acq.background.randoms == bg.randoms);
  io::write_sinogram(tmp.path / "a.psg.r", Sinogram(1, 3, 4));
  CHECK_THROWS_AS(io::read_acquisition(tmp.path / "a.psg"), FormatError);
}

TEST_CASE("malformed files raise format errors") {
  TempDir tmp;
  const auto p = tmp.path / "v.piv";
  io::write_volume(p, Volume(ImageGrid{2, 2, 2, 1.0, 1.0}, 1.0));
  truncate_by(p, 3);
  CHECK_THROWS_AS(io::read_volume(p), FormatError);

  write_bytes(p, "PIV1 2 2 1 4.0\n" + le_doubles({1, 2, 3, 4, 5}));
  CHECK_THROWS_AS(io::read_volume(p), FormatError);
  write_bytes(p, "PIVX 2 2 1 4.0\n" + le_doubles({1, 2, 3, 4}));
  CHECK_THROWS_AS(io::read_volume(p), FormatError);
  write_bytes(p, "PIV1 2 2 0 4.0\n");
  CHECK_THROWS_AS(io::read_volume(p), FormatError);
  write_bytes(p, "PIV1 2 2 1\n" + le_doubles({1, 2, 3, 4}));
  CHECK_THROWS_AS(io::read_volume(p), FormatError);
  write_bytes(p, "PSG1 1 1 1\n" + le_doubles({1}));
  CHECK_THROWS_AS(io::read_volume(p), FormatError);
  CHECK_THROWS_AS(io::read_sinogram(tmp.path / "missing.psg"), FormatError);

  const auto s = tmp.path / "s.psg";
  io::write_sinogram(s, Sinogram(1, 2, 2, 1.0));
  truncate_by(s, 8);
  CHECK_THROWS_AS(io::read_sinogram(s), FormatError);
}

TEST_CASE("PNW1 weights round trip and layout checks") {
  TempDir tmp;
  nn::NetworkConfig cfg;
  cfg.channels = {4, 8};
  cfg.batch_norm = true;
  auto w = nn::init_weights(cfg, 3);
  w.input_scale = 0.125;
  const auto p = tmp.path / "w.pnw";
  io::write_weights(p, w);
  const auto back = io::read_weights(p);
  CHECK(back.config == w.config);
  CHECK(back.input_scale == w.input_scale);
  REQUIRE(back.blocks.size() == w.blocks.size());
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    CHECK(back.blocks[b].name == w.blocks[b].name);
    CHECK(back.blocks[b].shape == w.blocks[b].shape);
    CHECK(back.blocks[b].trainable == w.blocks[b].trainable);
    CHECK(back.blocks[b].values == w.blocks[b].values);
  }
  CHECK(io::read_text(p).rfind("PNW1\n", 0) == 0);

  truncate_by(p, 1);
  CHECK_THROWS_AS(io::read_weights(p), FormatError);

  // A manifest whose block list disagrees with its configuration.
  io::write_weights(p, w);
  std::string text = io::read_text(p);
  const auto pos = text.find("channels 4 8");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 12, "channels 4 9");
  io::write_text(p, text);
  CHECK_THROWS_AS(io::read_weights(p), FormatError);

  io::write_text(p, "PNWX\n");
  CHECK_THROWS_AS(io::read_weights(p), FormatError);
}

TEST_CASE("curve and diagnostics CSVs") {
  TempDir tmp;
  std::vector<eval::Curve> curves{
      {"mlem", {{10, 0.1, 0.5, {0.4, 0.6}}, {20, 0.2, 0.7, {0.65, 0.75}}}},
      {"gauss", {{0, 0.3, 0.8, {0.8, 0.8}}}},
  };
  io::write_curves(tmp.path / "c.csv", curves);
  const std::string text = io::read_text(tmp.path / "c.csv");
  CHECK(text.rfind("method,sweep_value,std,cr\n", 0) == 0);
  auto back = io::read_curves(tmp.path / "c.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].method == "mlem");
  CHECK(back[1].method == "gauss");
  REQUIRE(back[0].points.size() == 2);
  CHECK(back[0].points[1].std == 0.2);
  CHECK(back[0].points[1].cr == 0.7);
  CHECK(back[0].points[1].sweep_value == 20);
  CHECK(back[0].points[0].realization_cr.empty());

  io::write_realizations(tmp.path / "r.csv", curves);
  CHECK(io::read_text(tmp.path / "r.csv").rfind("method,sweep_value,realization,cr\n", 0) == 0);
  io::read_realizations(tmp.path / "r.csv", back);
  CHECK(back[0].points[1].realization_cr == curves[0].points[1].realization_cr);
  CHECK(back[1].points[0].realization_cr == curves[1].points[0].realization_cr);

  io::write_text(tmp.path / "bad.csv", "method,std\nmlem,1\n");
  CHECK_THROWS_AS(io::read_curves(tmp.path / "bad.csv"), FormatError);
  io::write_text(tmp.path / "bad.csv", "method,sweep_value,std,cr\nmlem,1,2\n");
  CHECK_THROWS_AS(io::read_curves(tmp.path / "bad.csv"), FormatError);

  admm::Diagnostics d;
  d.iteration = 1;
  d.loglik = -12.5;
  d.residual = 0.25;
  d.alpha_objective = 3.0;
  d.step = 0.5;
  io::write_diagnostics(tmp.path / "d.csv", {d});
  const std::string diag = io::read_text(tmp.path / "d.csv");
  CHECK(diag.rfind("iter,loglik,residual,alpha_obj,L\n1,", 0) == 0);
}
