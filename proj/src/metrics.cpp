#include "transtrack/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "transtrack/assignment.hpp"

namespace transtrack {
namespace {

using FrameIndex = std::map<int, std::map<int, const Annotation*>>;  // frame -> id -> entry

FrameIndex index_sequence(const Sequence& seq, const char* what) {
  FrameIndex out;
  for (const auto& fa : seq) {
    auto& frame = out[fa.frame];
    for (const auto& e : fa.entries) {
      if (!frame.emplace(e.id, &e).second) {
        throw std::invalid_argument(std::string("duplicate (frame, id) in ") + what + ": (" +
                                    std::to_string(fa.frame) + ", " + std::to_string(e.id) +
                                    ")");
      }
    }
  }
  return out;
}

void check_ranges(const FrameIndex& gt, const FrameIndex& pred) {
  if (gt.empty() || pred.empty()) return;
  if (pred.rbegin()->first > gt.rbegin()->first || pred.begin()->first < 1) {
    throw std::invalid_argument("prediction frames extend outside the ground-truth range");
  }
}

double percent(long count, long total) {
  return 100.0 * static_cast<double>(count) / static_cast<double>(std::max(1L, total));
}

}  // namespace

double mota_from_rates(double fp_rate, double fn_rate, double idsw_rate) {
  return 100.0 - fp_rate - fn_rate - idsw_rate;
}

void MotReport::finalize_rates() {
  fp_rate = percent(fp, gt_count);
  fn_rate = percent(fn, gt_count);
  idsw_rate = percent(idsw, gt_count);
  mota = 100.0 * (1.0 - static_cast<double>(fp + fn + idsw) /
                            static_cast<double>(std::max(1L, gt_count)));
}

IdScore idf1(const Sequence& gt, const Sequence& pred, double iou_thresh) {
  const FrameIndex g = index_sequence(gt, "ground truth");
  const FrameIndex p = index_sequence(pred, "predictions");
  check_ranges(g, p);

  std::map<int, std::size_t> gt_ids, pred_ids;
  long total_gt = 0, total_pred = 0;
  for (const auto& [f, m] : g) {
    total_gt += static_cast<long>(m.size());
    for (const auto& [id, e] : m) gt_ids.emplace(id, 0);
  }
  for (const auto& [f, m] : p) {
    total_pred += static_cast<long>(m.size());
    for (const auto& [id, e] : m) pred_ids.emplace(id, 0);
  }
  std::size_t k = 0;
  for (auto& [id, idx] : gt_ids) idx = k++;
  k = 0;
  for (auto& [id, idx] : pred_ids) idx = k++;

  CostMatrix overlap(gt_ids.size(), pred_ids.size());
  for (const auto& [f, gm] : g) {
    const auto it = p.find(f);
    if (it == p.end()) continue;
    for (const auto& [gid, ge] : gm) {
      for (const auto& [pid, pe] : it->second) {
        if (iou(ge->box, pe->box) >= iou_thresh) overlap(gt_ids[gid], pred_ids[pid]) -= 1.0;
      }
    }
  }
  const Assignment a = solve_min_cost(overlap);
  IdScore s;
  s.idtp = static_cast<long>(-a.total_cost(overlap) + 0.5);
  s.idfn = total_gt - s.idtp;
  s.idfp = total_pred - s.idtp;
  const long denom = 2 * s.idtp + s.idfp + s.idfn;
  s.idf1 = denom > 0 ? 100.0 * 2.0 * static_cast<double>(s.idtp) / static_cast<double>(denom)
                     : 0.0;
  return s;
}

MotReport evaluate(const Sequence& gt, const Sequence& pred, double iou_thresh) {
  const FrameIndex g = index_sequence(gt, "ground truth");
  const FrameIndex p = index_sequence(pred, "predictions");
  check_ranges(g, p);

  MotReport r;
  std::set<int> frames;
  for (const auto& [f, m] : g) frames.insert(f);
  for (const auto& [f, m] : p) frames.insert(f);
  r.frames = frames.empty() ? 0 : *frames.rbegin();

  std::unordered_map<int, int> last_match;     // gt id -> last matched pred id
  std::map<int, int> prev_frame_matches;       // matches of frame t-1
  std::map<int, std::pair<long, long>> cover;  // gt id -> (present, matched)
  double iou_sum = 0.0;
  const std::map<int, const Annotation*> empty;

  for (int f = 1; f <= r.frames; ++f) {
    const auto git = g.find(f);
    const auto pit = p.find(f);
    const auto& gm = git != g.end() ? git->second : empty;
    const auto& pm = pit != p.end() ? pit->second : empty;
    r.gt_count += static_cast<long>(gm.size());
    r.pred_count += static_cast<long>(pm.size());

    std::map<int, int> matches;
    std::set<int> used_pred;
    for (const auto& [gid, pid] : prev_frame_matches) {
      const auto ge = gm.find(gid);
      const auto pe = pm.find(pid);
      if (ge == gm.end() || pe == pm.end()) continue;
      if (iou(ge->second->box, pe->second->box) >= iou_thresh) {
        matches[gid] = pid;
        used_pred.insert(pid);
      }
    }

    std::vector<int> free_gt, free_pred;
    for (const auto& [gid, e] : gm) {
      if (!matches.contains(gid)) free_gt.push_back(gid);
    }
    for (const auto& [pid, e] : pm) {
      if (!used_pred.contains(pid)) free_pred.push_back(pid);
    }
    if (!free_gt.empty() && !free_pred.empty()) {
      // Invalid pairs get a cost above any sum of valid ones, so the solver
      // first maximizes the number of valid matches, then their IoU.
      const double invalid = 2.0 + static_cast<double>(std::max(free_gt.size(), free_pred.size()));
      CostMatrix costs(free_gt.size(), free_pred.size());
      std::vector<double> ious(free_gt.size() * free_pred.size());
      for (std::size_t i = 0; i < free_gt.size(); ++i) {
        for (std::size_t j = 0; j < free_pred.size(); ++j) {
          const double v = iou(gm.at(free_gt[i])->box, pm.at(free_pred[j])->box);
          ious[i * free_pred.size() + j] = v;
          costs(i, j) = v >= iou_thresh ? 1.0 - v : invalid;
        }
      }
      for (const auto& [i, j] : solve_min_cost(costs).pairs) {
        if (ious[i * free_pred.size() + j] >= iou_thresh) matches[free_gt[i]] = free_pred[j];
      }
    }

    for (const auto& [gid, e] : gm) ++cover[gid].first;
    for (const auto& [gid, pid] : matches) {
      ++cover[gid].second;
      iou_sum += iou(gm.at(gid)->box, pm.at(pid)->box);
      const auto lm = last_match.find(gid);
      if (lm != last_match.end() && lm->second != pid) ++r.idsw;
      last_match[gid] = pid;
    }
    r.matches += static_cast<long>(matches.size());
    r.fn += static_cast<long>(gm.size() - matches.size());
    r.fp += static_cast<long>(pm.size() - matches.size());
    prev_frame_matches = std::move(matches);
  }

  r.motp = r.matches > 0 ? 100.0 * iou_sum / static_cast<double>(r.matches) : 0.0;
  r.gt_tracks = static_cast<long>(cover.size());
  for (const auto& [gid, c] : cover) {
    const double ratio = static_cast<double>(c.second) / static_cast<double>(c.first);
    if (ratio >= 0.8) ++r.mt_count;
    if (ratio <= 0.2) ++r.ml_count;
  }
  r.mt = r.gt_tracks > 0 ? percent(r.mt_count, r.gt_tracks) : 0.0;
  r.ml = r.gt_tracks > 0 ? percent(r.ml_count, r.gt_tracks) : 0.0;
  r.finalize_rates();

  const IdScore ids = idf1(gt, pred, iou_thresh);
  r.idf1 = ids.idf1;
  r.idtp = ids.idtp;
  r.idfp = ids.idfp;
  r.idfn = ids.idfn;
  return r;
}

MotReport merge_reports(std::span<const MotReport> parts) {
  MotReport total;
  double iou_sum = 0.0;
  for (const auto& r : parts) {
    total.fp += r.fp;
    total.fn += r.fn;
    total.idsw += r.idsw;
    total.gt_count += r.gt_count;
    total.pred_count += r.pred_count;
    total.matches += r.matches;
    total.gt_tracks += r.gt_tracks;
    total.mt_count += r.mt_count;
    total.ml_count += r.ml_count;
    total.idtp += r.idtp;
    total.idfp += r.idfp;
    total.idfn += r.idfn;
    total.frames += r.frames;
    iou_sum += r.motp * static_cast<double>(r.matches);
  }
  total.finalize_rates();
  total.motp = total.matches > 0 ? iou_sum / static_cast<double>(total.matches) : 0.0;
  total.mt = percent(total.mt_count, total.gt_tracks);
  total.ml = percent(total.ml_count, total.gt_tracks);
  const long denom = 2 * total.idtp + total.idfp + total.idfn;
  total.idf1 = denom > 0 ? 100.0 * 2.0 * static_cast<double>(total.idtp) / static_cast<double>(denom)
                         : 0.0;
  return total;
}

std::string format_report_table(const MotReport& r, const std::string& name) {
  char buf[512];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s %6s %6s %8s %8s %6s\n", "name", "MOTA",
                "IDF1", "MOTP", "MT", "ML", "FP", "FN", "IDs");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-16s %7.1f %7.1f %7.1f %6.1f %6.1f %8ld %8ld %6ld\n",
                name.c_str(), r.mota, r.idf1, r.motp, r.mt, r.ml, r.fp, r.fn, r.idsw);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-16s %7s %7s %7s %6s %6s %7.1f%% %7.1f%% %5.1f%%\n", "", "",
                "", "", "", "", r.fp_rate, r.fn_rate, r.idsw_rate);
  out += buf;
  return out;
}

std::string format_report_kv(const MotReport& r) {
  char buf[128];
  std::string out;
  auto real = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s %.6f\n", key, v);
    out += buf;
  };
  auto count = [&](const char* key, long v) {
    std::snprintf(buf, sizeof buf, "%s %ld\n", key, v);
    out += buf;
  };
  real("mota", r.mota);
  real("motp", r.motp);
  real("idf1", r.idf1);
  count("fp", r.fp);
  count("fn", r.fn);
  count("idsw", r.idsw);
  real("fp_rate", r.fp_rate);
  real("fn_rate", r.fn_rate);
  real("idsw_rate", r.idsw_rate);
  real("mt", r.mt);
  real("ml", r.ml);
  count("gt_count", r.gt_count);
  count("pred_count", r.pred_count);
  count("matches", r.matches);
  count("gt_tracks", r.gt_tracks);
  count("idtp", r.idtp);
  count("idfp", r.idfp);
  count("idfn", r.idfn);
  count("frames", r.frames);
  return out;
}

}  // namespace transtrack
