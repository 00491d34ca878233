#include "advseg/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "advseg/kernels.hpp"

namespace advseg {

namespace {

void require_same_dims(const Mask& a, const Mask& b, const char* op) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument(std::string(op) + ": " +
                                std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " +
                                std::to_string(b.width) + "x" +
                                std::to_string(b.height));
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::uint64_t overlap(const Mask& a, const Mask& b) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    if (a.labels[i] && b.labels[i]) ++n;
  return n;
}

std::uint64_t positives(const Mask& m) {
  std::uint64_t n = 0;
  for (std::uint8_t v : m.labels) n += v ? 1 : 0;
  return n;
}

}  // namespace

Mask binarize(const Tensor& prob, double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw std::invalid_argument("binarize: threshold " +
                                std::to_string(threshold) +
                                " outside [0, 1]");
  const auto& shape = prob.shape();
  int h = 0, w = 0;
  if (shape.size() == 2) {
    h = shape[0];
    w = shape[1];
  } else if (shape.size() == 4 && shape[0] == 1 && shape[1] == 1) {
    h = shape[2];
    w = shape[3];
  } else {
    throw std::invalid_argument("binarize: expected [H x W] or [1 x 1 x H x W], got " +
                                shape_str(shape));
  }
  Mask m;
  m.width = w;
  m.height = h;
  m.labels.resize(static_cast<std::size_t>(w) * h);
  const double* p = prob.data();
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    m.labels[i] = p[i] >= threshold ? 1 : 0;
  return m;
}

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
  require_same_dims(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.labels.size(); ++i) {
    const bool p = pred.labels[i] != 0, g = gt.labels[i] != 0;
    if (p && g)
      ++c.tp;
    else if (!p && !g)
      ++c.tn;
    else if (p)
      ++c.fp;
    else
      ++c.fn;
  }
  return c;
}

StrictMetrics strict_metrics(const ConfusionCounts& c) {
  StrictMetrics m{};
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = harmonic(m.precision, m.recall);
  m.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  return m;
}

Mask dilate(const Mask& mask, const RelaxedParams& params) {
  if (params.rho < 0) throw std::invalid_argument("dilate: rho must be >= 0");
  Mask out;
  out.width = mask.width;
  out.height = mask.height;
  out.labels.resize(mask.labels.size());
  kernels::dilate(mask.labels.data(), mask.width, mask.height, params.rho,
                  params.distance == Distance::euclidean, out.labels.data());
  return out;
}

RelaxedCounts relaxed_counts(const Mask& pred, const Mask& gt,
                             const RelaxedParams& params) {
  require_same_dims(pred, gt, "relaxed_counts");
  const Mask gt_halo = dilate(gt, params);
  const Mask pred_halo = dilate(pred, params);
  RelaxedCounts rc;
  rc.pred_total = positives(pred);
  rc.gt_total = positives(gt);
  rc.pred_matched = overlap(pred, gt_halo);
  rc.gt_matched = overlap(gt, pred_halo);
  return rc;
}

std::pair<double, double> relaxed_pr(const Mask& pred, const Mask& gt,
                                     const RelaxedParams& params) {
  const RelaxedCounts rc = relaxed_counts(pred, gt, params);
  return {ratio(rc.pred_matched, rc.pred_total), ratio(rc.gt_matched, rc.gt_total)};
}

std::pair<double, double> relaxed_f1_iou(const Mask& pred, const Mask& gt,
                                         const RelaxedParams& params) {
  const RelaxedCounts rc = relaxed_counts(pred, gt, params);
  const double rp = ratio(rc.pred_matched, rc.pred_total);
  const double rr = ratio(rc.gt_matched, rc.gt_total);
  const std::uint64_t rtp = rc.pred_matched;
  const std::uint64_t rfp = rc.pred_total - rc.pred_matched;
  const std::uint64_t rfn = rc.gt_total - rc.gt_matched;
  return {harmonic(rp, rr), ratio(rtp, rtp + rfp + rfn)};
}

MetricReport evaluate_pair(const Mask& pred, const Mask& gt,
                           const RelaxedParams& params) {
  MetricReport r;
  r.params = params;
  r.counts = confusion(pred, gt);
  r.relaxed = relaxed_counts(pred, gt, params);
  const StrictMetrics s = strict_metrics(r.counts);
  r.accuracy = s.accuracy;
  r.precision = s.precision;
  r.recall = s.recall;
  r.f1 = s.f1;
  r.iou = s.iou;
  r.relaxed_precision = ratio(r.relaxed.pred_matched, r.relaxed.pred_total);
  r.relaxed_recall = ratio(r.relaxed.gt_matched, r.relaxed.gt_total);
  r.relaxed_f1 = harmonic(r.relaxed_precision, r.relaxed_recall);
  const std::uint64_t rtp = r.relaxed.pred_matched;
  const std::uint64_t rfp = r.relaxed.pred_total - r.relaxed.pred_matched;
  const std::uint64_t rfn = r.relaxed.gt_total - r.relaxed.gt_matched;
  r.relaxed_iou = ratio(rtp, rtp + rfp + rfn);
  return r;
}

MetricReport aggregate(std::span<const MetricReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate: empty report list");
  MetricReport total;
  total.params = reports.front().params;
  for (const MetricReport& r : reports) {
    if (r.params.rho != total.params.rho ||
        r.params.distance != total.params.distance)
      throw std::invalid_argument("aggregate: mixed relaxed parameters");
    total.counts.tp += r.counts.tp;
    total.counts.tn += r.counts.tn;
    total.counts.fp += r.counts.fp;
    total.counts.fn += r.counts.fn;
    total.relaxed.pred_matched += r.relaxed.pred_matched;
    total.relaxed.pred_total += r.relaxed.pred_total;
    total.relaxed.gt_matched += r.relaxed.gt_matched;
    total.relaxed.gt_total += r.relaxed.gt_total;
  }
  const StrictMetrics s = strict_metrics(total.counts);
  total.accuracy = s.accuracy;
  total.precision = s.precision;
  total.recall = s.recall;
  total.f1 = s.f1;
  total.iou = s.iou;
  total.relaxed_precision = ratio(total.relaxed.pred_matched, total.relaxed.pred_total);
  total.relaxed_recall = ratio(total.relaxed.gt_matched, total.relaxed.gt_total);
  total.relaxed_f1 = harmonic(total.relaxed_precision, total.relaxed_recall);
  const std::uint64_t rtp = total.relaxed.pred_matched;
  const std::uint64_t rfp = total.relaxed.pred_total - total.relaxed.pred_matched;
  const std::uint64_t rfn = total.relaxed.gt_total - total.relaxed.gt_matched;
  total.relaxed_iou = ratio(rtp, rtp + rfp + rfn);
  return total;
}

std::string report_text(const MetricReport& r) {
  std::ostringstream os;
  os << "# relaxed matching: radius rho=" << r.params.rho << " under "
     << (r.params.distance == Distance::euclidean ? "euclidean" : "chebyshev")
     << " distance\n"
     << "# relaxed iou composition: rTP/(rTP+rFP+rFN) with rTP=|pred&dilate(gt)|,"
        " rFP=|pred|-rTP, rFN=|gt|-|gt&dilate(pred)|\n";
  os.setf(std::ios::fixed);
  os.precision(6);
  auto row = [&os](const char* key, double v) {
    os << key;
    for (std::size_t i = std::string(key).size(); i < 20; ++i) os << ' ';
    os << v << "\n";
  };
  row("accuracy", r.accuracy);
  row("precision", r.precision);
  row("recall", r.recall);
  row("f1", r.f1);
  row("iou", r.iou);
  row("relaxed_precision", r.relaxed_precision);
  row("relaxed_recall", r.relaxed_recall);
  row("relaxed_f1", r.relaxed_f1);
  row("relaxed_iou", r.relaxed_iou);
  os << "tp " << r.counts.tp << " tn " << r.counts.tn << " fp " << r.counts.fp
     << " fn " << r.counts.fn << "\n";
  return os.str();
}

}  // namespace advseg
