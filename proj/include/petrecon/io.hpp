#pragma once

#include <filesystem>
#include <vector>

#include "petrecon/acquisition.hpp"
#include "petrecon/admm.hpp"
#include "petrecon/metrics.hpp"
#include "petrecon/network.hpp"
#include "petrecon/sinogram.hpp"
#include "petrecon/volume.hpp"

namespace petrecon::io {

namespace fs = std::filesystem;

/// "PIV1 nx ny nz voxel_size\n" then little-endian doubles, x fastest. The
/// slice thickness is not stored; readers get slice_thickness = voxel_size
/// unless they pass the expected value.
void write_volume(const fs::path& path, const Volume& v);
Volume read_volume(const fs::path& path);
Volume read_volume(const fs::path& path, double slice_thickness);

/// "PSG1 n_slices n_angles n_bins\n" then little-endian doubles.
void write_sinogram(const fs::path& path, const Sinogram& s);
Sinogram read_sinogram(const fs::path& path);

/// Counts at `path`, scatter and randoms means in `path` + ".s" / ".r".
void write_acquisition(const fs::path& path, const Sinogram& counts, const acquisition::MeanComponents& bg);
struct StoredAcquisition {
  Sinogram counts;
  acquisition::MeanComponents background;
};
StoredAcquisition read_acquisition(const fs::path& path);

/// "PNW1" text manifest (configuration, then one line per block with name,
/// trainable flag and shape) ended by "end\n", then the blocks as
/// little-endian doubles in manifest order.
void write_weights(const fs::path& path, const nn::NetworkWeights& w);
nn::NetworkWeights read_weights(const fs::path& path);

/// `method,sweep_value,std,cr`.
void write_curves(const fs::path& path, const std::vector<eval::Curve>& curves);
std::vector<eval::Curve> read_curves(const fs::path& path);

/// `method,sweep_value,realization,cr`; merged into curves already read.
void write_realizations(const fs::path& path, const std::vector<eval::Curve>& curves);
void read_realizations(const fs::path& path, std::vector<eval::Curve>& curves);

/// `iter,loglik,residual,alpha_obj,L`.
void write_diagnostics(const fs::path& path, const std::vector<admm::Diagnostics>& diag);

/// Whole file contents.
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace petrecon::io
