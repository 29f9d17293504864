#include "gazelabel/mining.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <set>

namespace gazelabel {

namespace {

// Identity partition preserving first-appearance order.
std::vector<std::pair<std::string, std::vector<const FrameRecord*>>>
group_by_identity(const std::vector<FrameRecord>& frames) {
  std::vector<std::pair<std::string, std::vector<const FrameRecord*>>> out;
  std::map<std::string, std::size_t> index;
  for (const auto& f : frames) {
    auto it = index.find(f.identity_id);
    if (it == index.end()) {
      index[f.identity_id] = out.size();
      out.push_back({f.identity_id, {}});
      it = index.find(f.identity_id);
    }
    out[it->second].second.push_back(&f);
  }
  return out;
}

ThreeFrameSet make_grid_set(const FrameRecord& a, const FrameRecord& m,
                            const FrameRecord& b, const std::string& traj_id) {
  ThreeFrameSet set{a, m, b};
  set.start.order_index = 0;
  set.unlabelled.order_index = 1;
  set.end.order_index = 2;
  set.start.trajectory_id = traj_id;
  set.unlabelled.trajectory_id = traj_id;
  set.end.trajectory_id = traj_id;
  return set;
}

double unsigned_up_angle_deg(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  const double n = d.norm();
  if (n < 1e-9) {
    throw DegenerateLandmarks("coincident landmarks leave the eye angle undefined");
  }
  // Pixel coordinates: up is -y.
  const double cos_up = -d.y() / n;
  return std::acos(std::clamp(cos_up, -1.0, 1.0)) / std::numbers::pi * 180.0;
}

struct StepDir {
  int left = 0;
  int right = 0;
  bool active() const { return left != 0 || right != 0; }
};

}  // namespace

void validate(const GridSpec& spec) {
  if (spec.cols < 1 || spec.rows < 1) {
    throw InvalidConfig("grid needs cols >= 1 and rows >= 1");
  }
  if (!spec.horizontal && !spec.vertical && !spec.diagonal &&
      !spec.anti_diagonal) {
    throw InvalidConfig("grid mining needs at least one direction enabled");
  }
}

std::vector<ThreeFrameSet> mine_grid_sets(const std::vector<FrameRecord>& frames,
                                          const GridSpec& spec) {
  validate(spec);
  std::vector<ThreeFrameSet> out;

  for (const auto& [identity, members] : group_by_identity(frames)) {
    // Dwells collapse to their middle frame; each cell ends up with one
    // representative.
    std::map<std::pair<int, int>, std::vector<const FrameRecord*>> cells;
    for (const FrameRecord* f : members) {
      if (!f->cell) {
        throw MissingData("frame " + f->frame_id + " lacks a grid cell tag");
      }
      cells[{f->cell->col, f->cell->row}].push_back(f);
    }
    std::map<std::pair<int, int>, const FrameRecord*> rep;
    for (auto& [cell, dwell] : cells) {
      std::sort(dwell.begin(), dwell.end(),
                [](const FrameRecord* a, const FrameRecord* b) {
                  return a->order_index < b->order_index;
                });
      rep[cell] = dwell[(dwell.size() - 1) / 2];
    }

    // A line is usable only when complete; any absent cell voids it.
    auto collect = [&](int c0, int r0, int dc, int dr) {
      std::vector<const FrameRecord*> line;
      for (int c = c0, r = r0; c >= 0 && c < spec.cols && r >= 0 && r < spec.rows;
           c += dc, r += dr) {
        auto it = rep.find({c, r});
        if (it == rep.end()) return std::vector<const FrameRecord*>{};
        line.push_back(it->second);
      }
      return line;
    };

    std::vector<std::pair<std::string, std::vector<const FrameRecord*>>> lines;
    char tag[32];
    if (spec.horizontal) {
      for (int r = 0; r < spec.rows; ++r) {
        std::snprintf(tag, sizeof tag, "r%d", r);
        lines.push_back({tag, collect(0, r, 1, 0)});
      }
    }
    if (spec.vertical) {
      for (int c = 0; c < spec.cols; ++c) {
        std::snprintf(tag, sizeof tag, "c%d", c);
        lines.push_back({tag, collect(c, 0, 0, 1)});
      }
    }
    if (spec.diagonal) {
      int k = 0;
      for (int c = 0; c < spec.cols; ++c, ++k) {
        std::snprintf(tag, sizeof tag, "d%d", k);
        lines.push_back({tag, collect(c, 0, 1, 1)});
      }
      for (int r = 1; r < spec.rows; ++r, ++k) {
        std::snprintf(tag, sizeof tag, "d%d", k);
        lines.push_back({tag, collect(0, r, 1, 1)});
      }
    }
    if (spec.anti_diagonal) {
      int k = 0;
      for (int c = 0; c < spec.cols; ++c, ++k) {
        std::snprintf(tag, sizeof tag, "a%d", k);
        lines.push_back({tag, collect(c, 0, -1, 1)});
      }
      for (int r = 1; r < spec.rows; ++r, ++k) {
        std::snprintf(tag, sizeof tag, "a%d", k);
        lines.push_back({tag, collect(spec.cols - 1, r, -1, 1)});
      }
    }

    std::set<std::array<std::string, 3>> seen;
    auto emit = [&](const FrameRecord& a, const FrameRecord& m,
                    const FrameRecord& b, const std::string& traj_id) {
      if (!seen.insert({a.frame_id, m.frame_id, b.frame_id}).second) return;
      out.push_back(make_grid_set(a, m, b, traj_id));
      validate_set_structure(out.back());
    };

    for (const auto& [line_tag, line] : lines) {
      const std::size_t len = line.size();
      if (len < 3) continue;
      const std::string base = identity + "_" + line_tag;
      for (std::size_t i = 1; i + 1 < len; ++i) {
        emit(*line[0], *line[i], *line[len - 1], base + "_fwd");
        if (spec.bidirectional) {
          emit(*line[len - 1], *line[i], *line[0], base + "_rev");
        }
      }
    }
  }
  return out;
}

std::vector<ThreeFrameSet> mine_ordered_sets(const Trajectory& traj) {
  std::vector<ThreeFrameSet> out;
  const std::size_t n = traj.frames.size();
  if (n < 3) return out;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out.push_back(ThreeFrameSet{traj.frames.front(), traj.frames[i],
                                traj.frames.back()});
    validate_set_structure(out.back());
  }
  return out;
}

Trajectory sort_points_into_trajectory(const Trajectory& traj) {
  for (const auto& f : traj.frames) {
    if (!f.target) {
      throw MissingData("frame " + f.frame_id + " lacks a target point");
    }
  }
  Trajectory out = traj;
  std::stable_sort(out.frames.begin(), out.frames.end(),
                   [](const FrameRecord& a, const FrameRecord& b) {
                     if (a.target->x() != b.target->x()) {
                       return a.target->x() < b.target->x();
                     }
                     return a.target->y() < b.target->y();
                   });
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    out.frames[i].order_index = static_cast<std::int64_t>(i);
  }
  return out;
}

EyeAngles compute_eye_angles(const Landmarks& lm) {
  return EyeAngles{unsigned_up_angle_deg(lm.nose_tip, lm.pupil_left),
                   unsigned_up_angle_deg(lm.nose_tip, lm.pupil_right)};
}

double estimate_head_yaw_deg(const Landmarks& lm) {
  const double ipd = (lm.pupil_right - lm.pupil_left).norm();
  if (ipd < 1e-9) {
    throw DegenerateLandmarks("coincident pupils leave head yaw undefined");
  }
  const double mid_x = 0.5 * (lm.pupil_left.x() + lm.pupil_right.x());
  return std::atan2(lm.nose_tip.x() - mid_x, ipd) / std::numbers::pi * 180.0;
}

void validate(const WildConfig& cfg) {
  if (cfg.smooth_window < 1) throw InvalidConfig("smooth_window must be >= 1");
  if (cfg.sign_threshold_deg < 0.0) {
    throw InvalidConfig("sign_threshold_deg must be >= 0");
  }
  if (cfg.min_len < 2) throw InvalidConfig("min_len must be >= 2");
  if (cfg.max_head_yaw_deg <= 0.0) {
    throw InvalidConfig("max_head_yaw_deg must be > 0");
  }
}

std::vector<Trajectory> detect_wild_trajectories(
    const std::vector<FrameRecord>& stream, const WildConfig& cfg) {
  validate(cfg);
  std::vector<Trajectory> out;

  for (const auto& [identity, members] : group_by_identity(stream)) {
    std::vector<const FrameRecord*> kept;
    for (const FrameRecord* f : members) {
      if (!f->landmarks) {
        throw MissingData("frame " + f->frame_id +
                          " lacks landmarks for wild mining");
      }
      if (std::abs(estimate_head_yaw_deg(*f->landmarks)) <=
          cfg.max_head_yaw_deg) {
        kept.push_back(f);
      }
    }
    const std::size_t m = kept.size();
    if (m < 2) continue;

    std::vector<double> left(m), right(m);
    for (std::size_t i = 0; i < m; ++i) {
      const EyeAngles a = compute_eye_angles(*kept[i]->landmarks);
      left[i] = a.left_deg;
      right[i] = a.right_deg;
    }
    // Centered moving average, window clamped at the ends.
    auto smooth = [&](const std::vector<double>& v) {
      const int lo = (cfg.smooth_window - 1) / 2;
      const int hi = cfg.smooth_window / 2;
      std::vector<double> s(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t b = i >= static_cast<std::size_t>(lo) ? i - lo : 0;
        const std::size_t e = std::min(m - 1, i + static_cast<std::size_t>(hi));
        double sum = 0.0;
        for (std::size_t k = b; k <= e; ++k) sum += v[k];
        s[i] = sum / static_cast<double>(e - b + 1);
      }
      return s;
    };
    const std::vector<double> sl = smooth(left);
    const std::vector<double> sr = smooth(right);

    auto step_dir = [&](double d) {
      if (std::abs(d) < cfg.sign_threshold_deg) return 0;
      return d > 0 ? 1 : -1;
    };
    std::vector<StepDir> steps(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
      steps[i] = StepDir{step_dir(sl[i + 1] - sl[i]), step_dir(sr[i + 1] - sr[i])};
    }

    int seg = 0;
    auto close_run = [&](std::size_t first, std::size_t last) {
      const std::size_t len = last - first + 1;
      if (len < static_cast<std::size_t>(cfg.min_len)) return;
      Trajectory traj;
      char buf[64];
      std::snprintf(buf, sizeof buf, "%s_wild%02d", identity.c_str(), seg++);
      traj.trajectory_id = buf;
      traj.identity_id = identity;
      for (std::size_t i = first; i <= last; ++i) {
        FrameRecord fr = *kept[i];
        fr.trajectory_id = traj.trajectory_id;
        fr.order_index = static_cast<std::int64_t>(i - first);
        traj.frames.push_back(std::move(fr));
      }
      out.push_back(std::move(traj));
    };

    // A run extends while active steps keep their established signs.
    // An opposing sign ends the run at the reversal frame, which also
    // begins the next run; a motionless step just ends it.
    std::size_t run_start = 0;
    bool in_run = false;
    StepDir held;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const StepDir d = steps[i];
      if (!d.active()) {
        if (in_run) close_run(run_start, i);
        in_run = false;
        continue;
      }
      if (!in_run) {
        run_start = i;
        held = d;
        in_run = true;
        continue;
      }
      const bool conflict = (d.left != 0 && held.left != 0 && d.left != held.left) ||
                            (d.right != 0 && held.right != 0 && d.right != held.right);
      if (conflict) {
        close_run(run_start, i);
        run_start = i;
        held = d;
      } else {
        if (held.left == 0) held.left = d.left;
        if (held.right == 0) held.right = d.right;
      }
    }
    if (in_run) close_run(run_start, m - 1);
  }
  return out;
}

std::vector<LabelRecord> slerp_pseudo_labels(const Trajectory& traj,
                                             const GazeVector& start_label,
                                             const GazeVector& end_label) {
  const std::size_t n = traj.frames.size();
  if (n < 2) throw EmptyInput("pseudo-labelling needs at least 2 frames");
  std::vector<LabelRecord> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(n - 1);
    out.push_back(LabelRecord{traj.frames[k].frame_id,
                              slerp(start_label, end_label, t), "slerp"});
  }
  return out;
}

BudgetReport annotation_budget(const std::vector<ThreeFrameSet>& sets,
                               std::size_t total_frames) {
  if (total_frames == 0) throw EmptyInput("budget needs a nonempty dataset");
  std::set<std::string> terminals;
  std::set<std::string> starts;
  for (const auto& s : sets) {
    terminals.insert(s.start.frame_id);
    terminals.insert(s.end.frame_id);
    starts.insert(s.start.frame_id);
  }
  BudgetReport r;
  r.total_frames = total_frames;
  r.n_sets = sets.size();
  r.consumed_two_labels = terminals.size();
  r.consumed_one_label = starts.size();
  r.two_labels_fraction = static_cast<double>(r.consumed_two_labels) /
                          static_cast<double>(total_frames);
  r.one_label_fraction = static_cast<double>(r.consumed_one_label) /
                         static_cast<double>(total_frames);
  return r;
}

}  // namespace gazelabel
