#pragma once

#include "gazelabel/datamodel.hpp"

namespace gazelabel {

// Which grid lines become trajectories. Diagonals run down-right;
// down-left lines are off by default and sit behind anti_diagonal.
struct GridSpec {
  int cols = 7;
  int rows = 3;
  bool horizontal = true;
  bool vertical = true;
  bool diagonal = true;
  bool anti_diagonal = false;
  bool bidirectional = true;
};

void validate(const GridSpec& spec);

// Mines {first, interior, last} triples from every complete grid line
// of length >= 3, optionally also in reverse. Frames must carry cell
// tags; cells holding several frames (dwells) are reduced to the middle
// frame by order_index. Emitted sets carry synthetic trajectory ids and
// order 0,1,2 because grid data has no temporal order of its own.
// Handles multiple identities, mining each independently.
std::vector<ThreeFrameSet> mine_grid_sets(const std::vector<FrameRecord>& frames,
                                          const GridSpec& spec);

// Temporally ordered trajectory of n frames -> n-2 sets sharing the
// terminal frames. Fewer than 3 frames yield nothing.
std::vector<ThreeFrameSet> mine_ordered_sets(const Trajectory& traj);

// Orders point-of-gaze frames lexicographically by target (x, then y),
// ties keeping their original order, and rewrites order_index to the
// new positions. Every frame must carry a target.
Trajectory sort_points_into_trajectory(const Trajectory& traj);

struct EyeAngles {
  double left_deg = 0.0;
  double right_deg = 0.0;
};

// Unsigned angle at the nose tip between the upward vertical and the
// ray to each pupil. Image coordinates have y growing downward, so
// "up" is -y. Coincident landmarks throw DegenerateLandmarks.
EyeAngles compute_eye_angles(const Landmarks& lm);

// Head yaw proxy from the horizontal offset of the nose tip against
// the pupil midpoint, scaled by the interpupil distance:
//   yaw = atan2(nose_x - mid_x, |pupil_right - pupil_left|).
// Calibrated against the synthetic landmark model used in the tests;
// only the magnitude matters for gating.
double estimate_head_yaw_deg(const Landmarks& lm);

struct WildConfig {
  int smooth_window = 3;          // centered moving average, frames
  double sign_threshold_deg = 0.5;  // step smaller than this counts as no motion
  int min_len = 3;                // shortest run kept, frames
  double max_head_yaw_deg = 10.0;   // frames beyond this are dropped
};

void validate(const WildConfig& cfg);

// Splits a landmark stream into runs of consistent eye-angle motion.
// Frames failing the yaw gate are dropped first; the smoothed angle
// series is then cut wherever either angle's step changes sign or
// motion stops. A reversal frame ends one run and starts the next.
// Multiple identities are segmented independently.
std::vector<Trajectory> detect_wild_trajectories(
    const std::vector<FrameRecord>& stream, const WildConfig& cfg);

// Geodesic labels for every frame of a trajectory given its terminal
// gaze directions: frame k of n gets slerp(start, end; k/(n-1)).
std::vector<LabelRecord> slerp_pseudo_labels(const Trajectory& traj,
                                             const GazeVector& start_label,
                                             const GazeVector& end_label);

// Fraction of dataset frames whose labels each supervision mode
// consumes: distinct terminal frames over the manifest size for
// two-label training, distinct start frames for one-label training.
struct BudgetReport {
  std::size_t total_frames = 0;
  std::size_t n_sets = 0;
  std::size_t consumed_two_labels = 0;
  std::size_t consumed_one_label = 0;
  double two_labels_fraction = 0.0;
  double one_label_fraction = 0.0;
};

BudgetReport annotation_budget(const std::vector<ThreeFrameSet>& sets,
                               std::size_t total_frames);

}  // namespace gazelabel
