#pragma once

#include "sdsrl/dataio.hpp"
#include "sdsrl/kernel_lift.hpp"
#include "sdsrl/mplcd.hpp"

#include <string>
#include <vector>

namespace sdsrl {

enum class Modality { image, text };

struct TrainConfig {
    KernelSpec kernel_img{};
    KernelSpec kernel_txt{};
    Index landmarks_img = 0;  // Nystroem landmark counts, must not exceed corpus sizes
    Index landmarks_txt = 0;
    double mu = 1e-2;
    double eig_floor = 1e-10;
    SolverConfig solver{};
    bool normalize_inputs = true;
    std::uint64_t seed = 0;  // master seed; landmark picks and solver init derive from it
};

// The trained artifact: one feature-lifting map and one down-projection per
// modality. Lifted training features are not stored; they are recomputable.
struct SdsrlModel {
    NystroemMap map_img;
    NystroemMap map_txt;
    Matrix proj_img;  // map_img.out_dim() x q
    Matrix proj_txt;  // map_txt.out_dim() x q
    Index q = 0;
    bool normalize_inputs = true;
    double mu = 0.0;
    std::uint64_t seed = 0;
    Index requested_landmarks_img = 0;  // out_dim may shrink below these at the eigen floor
    Index requested_landmarks_txt = 0;
    std::vector<double> loss_trace;  // per-outer-loop objective; persisted as its tail
};

void validate_model(const SdsrlModel& model);

// Full training job: normalize (optional), fit both lifting maps on seeded
// landmark subsets, lift, build link matrices, factor them. Errors from any
// stage are re-raised tagged with the stage name.
SdsrlModel train(const Corpus& corpus, const TrainConfig& cfg);

// Rows of x mapped into the shared space: transform then project.
Matrix embed(const SdsrlModel& model, const Matrix& x, Modality modality);

// Model artifact: "SDSRLMDL" magic, u32 version, counted key=value manifest,
// six named matrix sections, u64 FNV-1a checksum over all preceding bytes.
void save_model(const SdsrlModel& model, const std::string& path);
SdsrlModel load_model(const std::string& path);

}  // namespace sdsrl
