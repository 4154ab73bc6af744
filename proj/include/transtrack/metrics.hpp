#pragma once

#include <span>
#include <string>

#include "transtrack/annotations.hpp"

namespace transtrack {

/// CLEAR-MOT and identity metrics. Rates are percentages of GT boxes, MT/ML
/// percentages of GT trajectories.
struct MotReport {
  double mota = 0.0;
  double motp = 0.0;  // mean IoU of matches, percent
  long fp = 0;
  long fn = 0;
  long idsw = 0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double idsw_rate = 0.0;
  double mt = 0.0;
  double ml = 0.0;
  double idf1 = 0.0;
  long gt_count = 0;

  long pred_count = 0;
  long matches = 0;
  long gt_tracks = 0;
  long mt_count = 0;
  long ml_count = 0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
  int frames = 0;

  /// Fills mota and the three rates from the raw counts. A GT count of zero
  /// is treated as one so the rates stay finite.
  void finalize_rates();
};

/// 100 - fp_rate - fn_rate - idsw_rate.
double mota_from_rates(double fp_rate, double fn_rate, double idsw_rate);

/// CLEAR-MOT evaluation. Correspondences from the previous frame are kept when
/// their IoU is still at least iou_thresh; the remaining boxes are matched by
/// a maximum-IoU assignment. Also fills the IDF1 fields.
/// Throws std::invalid_argument on duplicate (frame, id) or when predictions
/// extend past the last GT frame.
MotReport evaluate(const Sequence& gt, const Sequence& pred, double iou_thresh = 0.5);

struct IdScore {
  double idf1 = 0.0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
};

/// Global one-to-one identity matching over whole-sequence overlap counts.
IdScore idf1(const Sequence& gt, const Sequence& pred, double iou_thresh = 0.5);

/// Pools several reports as if their sequences were one: counts add up,
/// MOTP is match-weighted, IDF1 and MT/ML come from the summed counts.
MotReport merge_reports(std::span<const MotReport> parts);

/// Aligned text table, one row.
std::string format_report_table(const MotReport& r, const std::string& name = "sequence");
/// One "key value" line per metric with fixed key names.
std::string format_report_kv(const MotReport& r);

}  // namespace transtrack
