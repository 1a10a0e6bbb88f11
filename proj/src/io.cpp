#include "petrecon/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace petrecon::io {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_doubles(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(double));
  char* dst = out.data() + start;
  for (double v : values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    std::memcpy(dst, &bits, sizeof bits);
    dst += sizeof bits;
  }
}

void decode_doubles(const std::string& blob, std::size_t offset, std::span<double> out) {
  const char* src = blob.data() + offset;
  for (double& v : out) {
    std::uint64_t bits;
    std::memcpy(&bits, src, sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
    src += sizeof bits;
  }
}

// Splits "<header line>\n<payload>" and checks the payload holds exactly n doubles.
std::size_t split_header(const std::string& blob, const fs::path& path, std::string& header) {
  const auto nl = blob.find('\n');
  if (nl == std::string::npos) throw FormatError("'" + path.string() + "': missing header line");
  header = blob.substr(0, nl);
  return nl + 1;
}

void check_payload(const std::string& blob, std::size_t offset, std::size_t n, const fs::path& path) {
  const std::size_t expected = n * sizeof(double);
  const std::size_t have = blob.size() - offset;
  if (have < expected) throw FormatError("'" + path.string() + "' is truncated");
  if (have > expected) throw FormatError("'" + path.string() + "' has trailing data");
}

void write_blob(const fs::path& path, const std::string& blob) {
  auto out = open_out(path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("'" + path.string() + "': bad number '" + s + "'");
  }
}

}  // namespace

void write_volume(const fs::path& path, const Volume& v) {
  const auto& g = v.grid();
  std::string blob = "PIV1 " + std::to_string(g.nx) + " " + std::to_string(g.ny) + " " + std::to_string(g.nz) + " " +
                     format_double(g.voxel_size) + "\n";
  append_doubles(blob, v.values());
  write_blob(path, blob);
}

Volume read_volume(const fs::path& path, double slice_thickness) {
  const std::string blob = slurp(path);
  std::string header;
  const std::size_t off = split_header(blob, path, header);
  std::istringstream hs(header);
  std::string magic;
  ImageGrid g;
  hs >> magic >> g.nx >> g.ny >> g.nz >> g.voxel_size;
  std::string extra;
  if (magic != "PIV1" || hs.fail() || (hs >> extra)) throw FormatError("'" + path.string() + "': bad PIV1 header");
  if (g.nx < 1 || g.ny < 1 || g.nz < 1 || !(g.voxel_size > 0.0)) {
    throw FormatError("'" + path.string() + "': invalid PIV1 dimensions");
  }
  g.slice_thickness = slice_thickness > 0.0 ? slice_thickness : g.voxel_size;
  check_payload(blob, off, g.size(), path);
  std::vector<double> values(g.size());
  decode_doubles(blob, off, values);
  return Volume(g, std::move(values));
}

Volume read_volume(const fs::path& path) { return read_volume(path, 0.0); }

void write_sinogram(const fs::path& path, const Sinogram& s) {
  std::string blob = "PSG1 " + std::to_string(s.n_slices()) + " " + std::to_string(s.n_angles()) + " " +
                     std::to_string(s.n_bins()) + "\n";
  append_doubles(blob, s.values());
  write_blob(path, blob);
}

Sinogram read_sinogram(const fs::path& path) {
  const std::string blob = slurp(path);
  std::string header;
  const std::size_t off = split_header(blob, path, header);
  std::istringstream hs(header);
  std::string magic;
  int ns = 0;
  int na = 0;
  int nb = 0;
  hs >> magic >> ns >> na >> nb;
  std::string extra;
  if (magic != "PSG1" || hs.fail() || (hs >> extra)) throw FormatError("'" + path.string() + "': bad PSG1 header");
  if (ns < 1 || na < 1 || nb < 1) throw FormatError("'" + path.string() + "': invalid PSG1 dimensions");
  Sinogram s(ns, na, nb);
  check_payload(blob, off, s.size(), path);
  decode_doubles(blob, off, s.values());
  return s;
}

void write_acquisition(const fs::path& path, const Sinogram& counts, const acquisition::MeanComponents& bg) {
  write_sinogram(path, counts);
  write_sinogram(fs::path(path.string() + ".s"), bg.scatter);
  write_sinogram(fs::path(path.string() + ".r"), bg.randoms);
}

StoredAcquisition read_acquisition(const fs::path& path) {
  StoredAcquisition a{read_sinogram(path),
                      {read_sinogram(fs::path(path.string() + ".s")), read_sinogram(fs::path(path.string() + ".r"))}};
  if (!a.counts.same_shape(a.background.scatter) || !a.counts.same_shape(a.background.randoms)) {
    throw FormatError("'" + path.string() + "': companion mean files do not match the counts");
  }
  return a;
}

void write_weights(const fs::path& path, const nn::NetworkWeights& w) {
  const auto& c = w.config;
  std::ostringstream m;
  m << "PNW1\n";
  m << "in_channels " << c.in_channels << "\n";
  m << "channels";
  for (int ch : c.channels) m << " " << ch;
  m << "\n";
  m << "convs_per_scale " << c.convs_per_scale << "\n";
  m << "kernel_size " << c.kernel_size << "\n";
  m << "batch_norm " << (c.batch_norm ? 1 : 0) << "\n";
  m << "residual " << (c.residual ? 1 : 0) << "\n";
  m << "bn_momentum " << format_double(c.bn_momentum) << "\n";
  m << "bn_epsilon " << format_double(c.bn_epsilon) << "\n";
  m << "input_scale " << format_double(w.input_scale) << "\n";
  m << "blocks " << w.blocks.size() << "\n";
  for (const auto& b : w.blocks) {
    m << b.name << " " << (b.trainable ? 1 : 0) << " " << b.shape.size();
    for (int d : b.shape) m << " " << d;
    m << "\n";
  }
  m << "end\n";
  std::string blob = m.str();
  for (const auto& b : w.blocks) append_doubles(blob, b.values);
  write_blob(path, blob);
}

nn::NetworkWeights read_weights(const fs::path& path) {
  const std::string blob = slurp(path);
  const auto end_marker = blob.find("\nend\n");
  if (blob.rfind("PNW1\n", 0) != 0 || end_marker == std::string::npos) {
    throw FormatError("'" + path.string() + "': not a PNW1 weights file");
  }
  std::istringstream ms(blob.substr(5, end_marker - 5 + 1));
  auto fail = [&](const std::string& what) { return FormatError("'" + path.string() + "': " + what); };
  auto expect_key = [&](const char* key) {
    std::string k;
    if (!(ms >> k) || k != key) throw fail(std::string("expected '") + key + "' in manifest");
  };

  nn::NetworkWeights w;
  auto& c = w.config;
  expect_key("in_channels");
  ms >> c.in_channels;
  expect_key("channels");
  {
    std::string line;
    std::getline(ms, line);
    std::istringstream ls(line);
    c.channels.clear();
    int ch;
    while (ls >> ch) c.channels.push_back(ch);
  }
  int flag = 0;
  expect_key("convs_per_scale");
  ms >> c.convs_per_scale;
  expect_key("kernel_size");
  ms >> c.kernel_size;
  expect_key("batch_norm");
  ms >> flag;
  c.batch_norm = flag != 0;
  expect_key("residual");
  ms >> flag;
  c.residual = flag != 0;
  std::string num;
  expect_key("bn_momentum");
  ms >> num;
  c.bn_momentum = parse_double(num, path);
  expect_key("bn_epsilon");
  ms >> num;
  c.bn_epsilon = parse_double(num, path);
  expect_key("input_scale");
  ms >> num;
  w.input_scale = parse_double(num, path);
  std::size_t n_blocks = 0;
  expect_key("blocks");
  ms >> n_blocks;
  if (ms.fail()) throw fail("malformed manifest");

  std::vector<nn::ParamBlock> expected;
  try {
    expected = nn::expected_blocks(c);
  } catch (const ConfigError& e) {
    throw fail(std::string("invalid network configuration: ") + e.what());
  }
  if (n_blocks != expected.size()) throw fail("block count does not match the network configuration");
  std::size_t total = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    nn::ParamBlock block;
    int trainable = 0;
    std::size_t rank = 0;
    ms >> block.name >> trainable >> rank;
    block.shape.resize(rank);
    for (auto& d : block.shape) ms >> d;
    if (ms.fail()) throw fail("malformed block line");
    block.trainable = trainable != 0;
    if (block.name != expected[b].name || block.shape != expected[b].shape ||
        block.trainable != expected[b].trainable) {
      throw fail("block '" + block.name + "' does not match the expected layout ('" + expected[b].name + "')");
    }
    block.values.resize(expected[b].values.size());
    total += block.values.size();
    w.blocks.push_back(std::move(block));
  }
  std::string extra;
  if (ms >> extra) throw fail("unexpected manifest content '" + extra + "'");

  const std::size_t off = end_marker + 5;
  check_payload(blob, off, total, path);
  std::size_t pos = off;
  for (auto& b : w.blocks) {
    decode_doubles(blob, pos, b.values);
    pos += b.values.size() * sizeof(double);
  }
  return w;
}

void write_curves(const fs::path& path, const std::vector<eval::Curve>& curves) {
  std::string out = "method,sweep_value,std,cr\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      out += c.method + "," + format_double(p.sweep_value) + "," + format_double(p.std) + "," + format_double(p.cr) + "\n";
    }
  }
  write_text(path, out);
}

std::vector<eval::Curve> read_curves(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"method", "sweep_value", "std", "cr"}) {
    throw FormatError("'" + path.string() + "': bad curve header");
  }
  std::vector<eval::Curve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw FormatError("'" + path.string() + "': curve rows need 4 fields");
    if (curves.empty() || curves.back().method != f[0]) curves.push_back({f[0], {}});
    curves.back().points.push_back({parse_double(f[1], path), parse_double(f[2], path), parse_double(f[3], path), {}});
  }
  return curves;
}

void write_realizations(const fs::path& path, const std::vector<eval::Curve>& curves) {
  std::string out = "method,sweep_value,realization,cr\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      for (std::size_t r = 0; r < p.realization_cr.size(); ++r) {
        out += c.method + "," + format_double(p.sweep_value) + "," + std::to_string(r) + "," +
               format_double(p.realization_cr[r]) + "\n";
      }
    }
  }
  write_text(path, out);
}

void read_realizations(const fs::path& path, std::vector<eval::Curve>& curves) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"method", "sweep_value", "realization", "cr"}) {
    throw FormatError("'" + path.string() + "': bad realization header");
  }
  std::map<std::pair<std::string, double>, eval::SweepPoint*> index;
  for (auto& c : curves) {
    for (auto& p : c.points) {
      p.realization_cr.clear();
      index[{c.method, p.sweep_value}] = &p;
    }
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw FormatError("'" + path.string() + "': realization rows need 4 fields");
    const auto it = index.find({f[0], parse_double(f[1], path)});
    if (it == index.end()) throw FormatError("'" + path.string() + "': row for unknown curve point");
    const auto r = static_cast<std::size_t>(parse_double(f[2], path));
    if (r != it->second->realization_cr.size()) throw FormatError("'" + path.string() + "': realizations out of order");
    it->second->realization_cr.push_back(parse_double(f[3], path));
  }
}

void write_diagnostics(const fs::path& path, const std::vector<admm::Diagnostics>& diag) {
  std::string out = "iter,loglik,residual,alpha_obj,L\n";
  for (const auto& d : diag) {
    out += std::to_string(d.iteration) + "," + format_double(d.loglik) + "," + format_double(d.residual) + "," +
           format_double(d.alpha_objective) + "," + format_double(d.step) + "\n";
  }
  write_text(path, out);
}

std::string read_text(const fs::path& path) { return slurp(path); }

void write_text(const fs::path& path, const std::string& text) { write_blob(path, text); }

}  // namespace petrecon::io
