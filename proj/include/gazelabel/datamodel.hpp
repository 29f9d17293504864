#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gazelabel/geometry.hpp"

namespace gazelabel {

// Supervision modes: both terminal frames labelled, or the start only.
enum class Mode { TwoLabels, OneLabel };

struct Landmarks {
  Vec2 pupil_left;
  Vec2 pupil_right;
  Vec2 nose_tip;
};

struct GridCell {
  int col = 0;
  int row = 0;
};

// One observed frame. Features are the only mandatory payload; label,
// landmarks, grid cell and 2-D target are dataset-dependent extras.
struct FrameRecord {
  std::string frame_id;
  std::string identity_id;
  std::string trajectory_id;
  std::int64_t order_index = 0;
  VecX features;
  std::optional<GazeVector> label;
  std::optional<Landmarks> landmarks;
  std::optional<GridCell> cell;
  std::optional<Vec2> target;
};

// Frames of one recording, strictly ordered by order_index.
struct Trajectory {
  std::string trajectory_id;
  std::string identity_id;
  std::vector<FrameRecord> frames;
};

// Weak-supervision unit: two terminal frames bracketing one frame whose
// label the model must produce. order_index increases start -> end.
struct ThreeFrameSet {
  FrameRecord start;
  FrameRecord unlabelled;
  FrameRecord end;
};

// Throws unless the set's frames share an identity and trajectory and
// order_index strictly increases. Label availability is checked
// separately because it depends on the supervision mode.
void validate_set_structure(const ThreeFrameSet& set);

struct DatasetSplit {
  std::vector<ThreeFrameSet> train;
  std::vector<ThreeFrameSet> test;
};

// Identity-disjoint partition of sets. Identities are shuffled with the
// seed, then the train side takes the count whose achieved fraction is
// closest to the target. Throws CannotSplit with fewer than two
// identities, InvalidConfig for a fraction outside (0, 1).
DatasetSplit split_identity_disjoint(const std::vector<ThreeFrameSet>& sets,
                                     double train_fraction,
                                     std::uint64_t seed);

struct SynthConfig {
  int n_identities = 6;
  int trajectories_per_identity = 3;
  int frames_per_trajectory = 9;
  int feature_dim = 24;
  int appearance_dim = 4;
  double noise_sigma = 0.01;
  // Arc length drawn for each trajectory's gaze path, degrees.
  double min_arc_deg = 10.0;
  double max_arc_deg = 120.0;
  std::uint64_t seed = 1;
  // Drives the gaze-to-feature mixing matrix only, so two datasets can
  // share the gaze mapping while everything else differs.
  std::uint64_t mixing_seed = 1;
};

void validate(const SynthConfig& cfg);

// Generates fully labelled trajectories: per trajectory a geodesic gaze
// path between two random unit vectors, features = A*gaze +
// B*appearance + noise. A depends on mixing_seed alone; appearance is
// per identity; the gaze path depends only on the trajectory ordinal,
// so the same ordinal across identities replays the same path.
std::vector<Trajectory> synth_generate(const SynthConfig& cfg);

// --- manifest and label files ---------------------------------------

// Manifest: one frame per line, 9 '|'-separated fields:
//   frame_id|identity|trajectory|order_index|label|landmarks|cell|target|features
// label = "gx,gy,gz" or empty; landmarks = 6 reals (pupil_left,
// pupil_right, nose_tip) or empty; cell = "col,row" or empty; target =
// "x,y" or empty; features = inline comma-separated reals or
// "@relative/path" to a raw little-endian float32 file resolved against
// the manifest's directory. Lines starting with '#' are comments.
// Reals are written with 9 significant digits.
std::vector<Trajectory> load_manifest(const std::filesystem::path& path);

enum class FeatureStorage { Inline, Files };

// Writes trajectories back out; with FeatureStorage::Files the vectors
// go to <dir>/features/<frame_id>.f32.
void write_manifest(const std::filesystem::path& path,
                    const std::vector<Trajectory>& trajectories,
                    FeatureStorage storage = FeatureStorage::Inline);

struct LabelRecord {
  std::string frame_id;
  GazeVector label;
  std::string source;  // e.g. "truth", "slerp", "model-2l"
};

// CSV with header "frame_id,gx,gy,gz,source". Labels must be unit norm.
void write_labels(const std::filesystem::path& path,
                  const std::vector<LabelRecord>& records);

std::vector<LabelRecord> read_labels(const std::filesystem::path& path);

// Shared float formatting for every text file this library writes.
std::string format_real(double v);

}  // namespace gazelabel
