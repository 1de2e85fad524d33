#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "camlab/bnb.hpp"
#include "camlab/gcnn.hpp"
#include "camlab/samples.hpp"

namespace camlab {

struct TrainConfig {
    double lambda1 = 0.05;  // infoNCE weight
    double lambda2 = 0.01;  // consistency weight
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    int max_epochs = 30;
    int plateau_patience = 10;
    double plateau_factor = 0.2;
    int augmentations_per_sample = 9;
    double shift_magnitude = 10.0;
    bool supervise_augmented = true;  // apply L_sup to augmented samples too
    double validation_fraction = 0.1;
    double spot_check_fraction = 0.05;  // FSB label recheck on augmented data
    std::uint64_t seed = 0;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("lambdas must be >= 0");
        if (!(plateau_factor > 0 && plateau_factor < 1))
            throw std::invalid_argument("plateau_factor must be in (0,1)");
        if (batch_size < 1 || max_epochs < 0 || augmentations_per_sample < 0)
            throw std::invalid_argument("invalid train config sizes");
    }
};

/// key=value config file mirroring TrainConfig; unknown keys are an error.
inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    TrainConfig c;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            auto e = s.find_last_not_of(" \t\r");
            s.erase(e == std::string::npos ? 0 : e + 1);
            return s;
        };
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key.empty()) continue;
        if (key == "lambda1") c.lambda1 = std::stod(val);
        else if (key == "lambda2") c.lambda2 = std::stod(val);
        else if (key == "learning_rate") c.learning_rate = std::stod(val);
        else if (key == "adam_beta1") c.adam_beta1 = std::stod(val);
        else if (key == "adam_beta2") c.adam_beta2 = std::stod(val);
        else if (key == "batch_size") c.batch_size = std::stoi(val);
        else if (key == "max_epochs") c.max_epochs = std::stoi(val);
        else if (key == "plateau_patience") c.plateau_patience = std::stoi(val);
        else if (key == "plateau_factor") c.plateau_factor = std::stod(val);
        else if (key == "augmentations_per_sample") c.augmentations_per_sample = std::stoi(val);
        else if (key == "shift_magnitude") c.shift_magnitude = std::stod(val);
        else if (key == "supervise_augmented") c.supervise_augmented = (val == "1" || val == "true");
        else if (key == "validation_fraction") c.validation_fraction = std::stod(val);
        else if (key == "spot_check_fraction") c.spot_check_fraction = std::stod(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else throw std::runtime_error("unknown config key '" + key + "' at line " +
                                      std::to_string(lineno));
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Losses

inline double loss_sup(const VectorXd& probs, int action) {
    if (action < 0 || action >= probs.size())
        throw std::invalid_argument("loss_sup: action out of range");
    return -std::log(std::max(probs[action], 1e-12));
}

/// infoNCE over a batch of unit-norm embeddings, temperature 1.
inline double loss_infonce(const std::vector<VectorXd>& g_ori,
                           const std::vector<VectorXd>& g_aug) {
    const std::size_t n = g_ori.size();
    if (n == 0 || g_aug.size() != n)
        throw std::invalid_argument("loss_infonce: batch mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -kInf;
        std::vector<double> sims(n);
        for (std::size_t j = 0; j < n; ++j) {
            sims[j] = g_ori[i].dot(g_aug[j]);
            mx = std::max(mx, sims[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) denom += std::exp(sims[j] - mx);
        loss -= (sims[i] - mx) - std::log(denom);
    }
    return loss;
}

/// Consistency loss: summed squared distance between the paired candidate
/// probability vectors.
inline double loss_aux(const std::vector<VectorXd>& p_ori,
                       const std::vector<VectorXd>& p_aug) {
    if (p_ori.size() != p_aug.size())
        throw std::invalid_argument("loss_aux: batch mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < p_ori.size(); ++i) {
        if (p_ori[i].size() != p_aug[i].size())
            throw std::invalid_argument("loss_aux: candidate-set mismatch");
        loss += (p_ori[i] - p_aug[i]).squaredNorm();
    }
    return loss;
}

struct LossBreakdown {
    double total = 0.0;
    double sup = 0.0;
    double nce = 0.0;
    double aux = 0.0;
};

/// One member of a training batch: an original and (optionally) one of its
/// augmented partners.
struct TrainPair {
    const ExpertSample* ori = nullptr;
    const ExpertSample* aug = nullptr;  // null: plain behavioural cloning
};

/// L = L_sup + lambda1 * L_infoNCE + lambda2 * L_aux over one batch, with
/// exact parameter gradients when `grads` is given. L_sup is the mean over
/// all supervised members; the contrastive terms need every pair present.
inline LossBreakdown total_loss(const GcnnParams& params,
                                const std::vector<TrainPair>& batch,
                                const TrainConfig& cfg,
                                GcnnParams* grads = nullptr) {
    const std::size_t n = batch.size();
    if (n == 0) throw std::invalid_argument("empty batch");
    bool paired = batch.front().aug != nullptr;
    for (const auto& pr : batch)
        if ((pr.aug != nullptr) != paired)
            throw std::invalid_argument("mixed paired/unpaired batch");

    std::vector<ForwardCache> cache_o(n), cache_a(paired ? n : 0);
    std::vector<PolicyOutput> out_o(n), out_a(paired ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
        out_o[i] = gcnn_forward(params, batch[i].ori->state, &cache_o[i]);
        if (paired) out_a[i] = gcnn_forward(params, batch[i].aug->state, &cache_a[i]);
    }

    LossBreakdown lb;
    long n_sup = static_cast<long>(n);
    if (paired && cfg.supervise_augmented) n_sup += static_cast<long>(n);
    for (std::size_t i = 0; i < n; ++i) {
        lb.sup += loss_sup(out_o[i].probs, batch[i].ori->action);
        if (paired && cfg.supervise_augmented)
            lb.sup += loss_sup(out_a[i].probs, batch[i].aug->action);
    }
    lb.sup /= static_cast<double>(n_sup);

    std::vector<VectorXd> gt_o(n), gt_a(n), p_o(n), p_a(n);
    if (paired) {
        for (std::size_t i = 0; i < n; ++i) {
            gt_o[i] = out_o[i].normalized_embedding;
            gt_a[i] = out_a[i].normalized_embedding;
            p_o[i] = out_o[i].probs;
            p_a[i] = out_a[i].probs;
        }
        // Per-pair means, so the lambda weights trade off against the mean
        // supervised loss independently of the batch size.
        lb.nce = loss_infonce(gt_o, gt_a) / static_cast<double>(n);
        lb.aux = loss_aux(p_o, p_a) / static_cast<double>(n);
    }
    lb.total = lb.sup + cfg.lambda1 * lb.nce + cfg.lambda2 * lb.aux;
    if (!std::isfinite(lb.total)) throw std::runtime_error("non-finite loss");
    if (!grads) return lb;

    // Similarity softmax rows for the infoNCE gradient.
    MatrixXd dS;
    if (paired && cfg.lambda1 > 0) {
        dS.resize(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            VectorXd sims(n);
            for (std::size_t j = 0; j < n; ++j) sims[j] = gt_o[i].dot(gt_a[j]);
            double mx = sims.maxCoeff();
            VectorXd ex = (sims.array() - mx).exp();
            VectorXd sm = ex / ex.sum();
            for (std::size_t j = 0; j < n; ++j)
                dS(i, j) = cfg.lambda1 / static_cast<double>(n) *
                           (sm[j] - (i == j ? 1.0 : 0.0));
        }
    }

    auto softmax_logit_grad = [](const VectorXd& probs, const VectorXd& dProbs) {
        double inner = probs.dot(dProbs);
        return VectorXd((dProbs.array() - inner) * probs.array());
    };
    auto normalize_grad = [](const VectorXd& g, const VectorXd& d_gt) {
        double norm = g.norm();
        VectorXd gt = g / norm;
        return VectorXd((d_gt - gt * gt.dot(d_gt)) / norm);
    };

    for (std::size_t i = 0; i < n; ++i) {
        // Original sample: supervised CE plus aux plus infoNCE row/column.
        VectorXd d_logits_o = out_o[i].probs;
        d_logits_o[batch[i].ori->action] -= 1.0;
        d_logits_o /= static_cast<double>(n_sup);
        VectorXd d_graph_o;
        if (paired) {
            if (cfg.lambda2 > 0) {
                VectorXd dP =
                    2.0 * cfg.lambda2 / static_cast<double>(n) * (p_o[i] - p_a[i]);
                d_logits_o += softmax_logit_grad(out_o[i].probs, dP);
            }
            if (cfg.lambda1 > 0) {
                VectorXd d_gt = VectorXd::Zero(gt_o[i].size());
                for (std::size_t j = 0; j < n; ++j) d_gt += dS(i, j) * gt_a[j];
                d_graph_o = normalize_grad(out_o[i].graph_embedding, d_gt);
            }
        }
        gcnn_backward(params, batch[i].ori->state, cache_o[i], d_logits_o, d_graph_o,
                      *grads);

        if (paired) {
            VectorXd d_logits_a = VectorXd::Zero(out_a[i].probs.size());
            if (cfg.supervise_augmented) {
                d_logits_a = out_a[i].probs;
                d_logits_a[batch[i].aug->action] -= 1.0;
                d_logits_a /= static_cast<double>(n_sup);
            }
            if (cfg.lambda2 > 0) {
                VectorXd dP =
                    -2.0 * cfg.lambda2 / static_cast<double>(n) * (p_o[i] - p_a[i]);
                d_logits_a += softmax_logit_grad(out_a[i].probs, dP);
            }
            VectorXd d_graph_a;
            if (cfg.lambda1 > 0) {
                VectorXd d_gt = VectorXd::Zero(gt_a[i].size());
                for (std::size_t j = 0; j < n; ++j) d_gt += dS(j, i) * gt_o[j];
                d_graph_a = normalize_grad(out_a[i].graph_embedding, d_gt);
            }
            gcnn_backward(params, batch[i].aug->state, cache_a[i], d_logits_a,
                          d_graph_a, *grads);
        }
    }
    return lb;
}

// ---------------------------------------------------------------------------
// Augmentation

/// Build one augmented partner per (sample, shift). The label carries over
/// unchanged: the shifted problem makes the same branching decision.
inline ExpertSample augment_sample(const ExpertSample& ori, const ShiftVector& s,
                                   long pair_id) {
    ExpertSample aug;
    aug.state = derive_augmented_state(ori.state, ori.instance, s);
    aug.action = ori.action;
    aug.candidates = ori.candidates;
    aug.instance = shift_instance(ori.instance, s);
    aug.instance_ref = ori.instance_ref;
    aug.depth = ori.depth;
    aug.pair_id = pair_id;
    aug.shift = s;
    return aug;
}

/// Recompute the FSB action from scratch on a sampled subset of augmented
/// samples; any disagreement with the stored label is a hard failure.
struct SpotCheckReport {
    long checked = 0;
    long mismatches = 0;
    bool pass() const { return mismatches == 0; }
};

inline SpotCheckReport spot_check_labels(const std::vector<ExpertSample>& samples,
                                         double fraction, std::mt19937_64& rng,
                                         SimplexOptions opts = {}) {
    SpotCheckReport rep;
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (const auto& s : samples) {
        if (!s.shift) continue;
        if (coin(rng) >= fraction) continue;
        ++rep.checked;
        LpResult lp = solve_lp(s.instance, opts);
        if (lp.status != LpStatus::Optimal) { ++rep.mismatches; continue; }
        std::vector<int> cands;
        for (int j = 0; j < s.instance.n_vars; ++j)
            if (s.instance.integer_mask[j] && is_candidate_value(lp.x[j]))
                cands.push_back(j);
        if (cands != s.candidates) { ++rep.mismatches; continue; }
        auto scores = fsb_scores(s.instance, lp, cands, {}, opts);
        int var = argmax_with_ties(scores, cands);
        auto it = std::find(cands.begin(), cands.end(), var);
        if (static_cast<int>(it - cands.begin()) != s.action) ++rep.mismatches;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Evaluation

struct TopkTable {
    std::vector<int> ks;
    std::vector<double> acc;  // same order as ks
    long samples = 0;
};

inline TopkTable eval_topk(const GcnnParams& params,
                           const std::vector<ExpertSample>& testset,
                           std::vector<int> ks = {1, 5, 10}) {
    TopkTable t;
    t.ks = ks;
    t.acc.assign(ks.size(), 0.0);
    for (const auto& s : testset) {
        PolicyOutput out = gcnn_forward(params, s.state);
        std::vector<int> order(out.probs.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (out.probs[a] != out.probs[b]) return out.probs[a] > out.probs[b];
            return a < b;
        });
        int rank = static_cast<int>(std::find(order.begin(), order.end(), s.action) -
                                    order.begin());
        for (std::size_t k = 0; k < ks.size(); ++k)
            if (rank < ks[k]) t.acc[k] += 1.0;
        ++t.samples;
    }
    if (t.samples > 0)
        for (auto& a : t.acc) a /= static_cast<double>(t.samples);
    return t;
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochStats {
    int epoch = 0;
    double l_sup = 0.0, l_nce = 0.0, l_aux = 0.0;
    double val_acc1 = 0.0;
    double val_sup = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    GcnnParams params;
    std::vector<EpochStats> history;
    long train_originals = 0;
    long val_originals = 0;

    std::string history_csv() const {
        std::string out = "epoch,l_sup,l_nce,l_aux,val_acc1,lr\n";
        char buf[256];
        for (const auto& e : history) {
            std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                          e.epoch, e.l_sup, e.l_nce, e.l_aux, e.val_acc1, e.lr);
            out += buf;
        }
        return out;
    }
};

class AdamOptimizer {
public:
    AdamOptimizer(std::size_t n, double beta1, double beta2, double eps)
        : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
            theta[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

/// Per-feature standardization from the supervised training states.
inline void fit_standardization(GcnnParams& p, const std::vector<const ExpertSample*>& samples) {
    auto fit = [](auto get_rows, int dim, VectorXd& mean, VectorXd& stddev) {
        VectorXd sum = VectorXd::Zero(dim), sum2 = VectorXd::Zero(dim);
        long n = 0;
        get_rows([&](const double* row) {
            for (int k = 0; k < dim; ++k) {
                sum[k] += row[k];
                sum2[k] += row[k] * row[k];
            }
            ++n;
        });
        if (n == 0) return;
        mean = sum / static_cast<double>(n);
        for (int k = 0; k < dim; ++k) {
            double var = sum2[k] / n - mean[k] * mean[k];
            stddev[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
    };
    fit([&](auto&& emit) {
        for (const auto* s : samples)
            for (const auto& r : s->state.cons_feats) emit(r.data());
    }, kNumConsFeats, p.cons_mean, p.cons_std);
    fit([&](auto&& emit) {
        for (const auto* s : samples)
            for (const auto& r : s->state.var_feats) emit(r.data());
    }, kNumVarFeats, p.var_mean, p.var_std);
    fit([&](auto&& emit) {
        for (const auto* s : samples)
            for (const auto& e : s->state.edges) emit(&e.coef);
    }, 1, p.edge_mean, p.edge_std);
}

/// Imitation training. The dataset is originals in file order, each optionally
/// followed by its pre-built augmented partners; when none are supplied,
/// cfg.augmentations_per_sample partners per original are generated once up
/// front. Epoch e pairs each original with partner e mod k. Validation is
/// split by instance, never by sample.
inline TrainResult train(const TrainConfig& cfg, const std::vector<ExpertSample>& dataset) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    std::mt19937_64 rng(cfg.seed);

    // Partition into originals and the partners that follow them.
    std::vector<const ExpertSample*> originals;
    std::vector<std::vector<ExpertSample>> all_partners;
    for (const auto& s : dataset) {
        if (!s.shift) {
            originals.push_back(&s);
            all_partners.emplace_back();
        } else {
            if (originals.empty())
                throw std::invalid_argument("augmented sample precedes any original");
            all_partners.back().push_back(s);
        }
    }
    bool preaugmented = false;
    for (const auto& ps : all_partners) preaugmented |= !ps.empty();

    // Instance-level validation split.
    std::vector<std::string> refs;
    for (const auto* s : originals)
        if (std::find(refs.begin(), refs.end(), s->instance_ref) == refs.end())
            refs.push_back(s->instance_ref);
    std::size_t n_val_refs = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(refs.size())));
    std::vector<std::string> val_refs(refs.end() - n_val_refs, refs.end());
    auto is_val = [&](const ExpertSample& s) {
        return std::find(val_refs.begin(), val_refs.end(), s.instance_ref) != val_refs.end();
    };
    std::vector<const ExpertSample*> train_set, val_set;
    std::vector<std::vector<ExpertSample>> partners;
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (is_val(*originals[i])) {
            val_set.push_back(originals[i]);
        } else {
            train_set.push_back(originals[i]);
            partners.push_back(std::move(all_partners[i]));
        }
    }
    if (train_set.empty()) throw std::invalid_argument("no training samples after split");

    // Offline augmentation, unless the dataset already carries partners.
    if (!preaugmented)
        for (std::size_t i = 0; i < train_set.size(); ++i)
            for (int a = 0; a < cfg.augmentations_per_sample; ++a) {
                ShiftVector s =
                    sample_shift(train_set[i]->instance, cfg.shift_magnitude, rng);
                partners[i].push_back(
                    augment_sample(*train_set[i], s, static_cast<long>(i)));
            }
    std::size_t k = partners.front().size();
    for (const auto& ps : partners)
        if (ps.size() != k)
            throw std::invalid_argument("every original needs the same partner count");

    TrainResult res;
    res.train_originals = static_cast<long>(train_set.size());
    res.val_originals = static_cast<long>(val_set.size());
    res.params = make_zero_params();
    {
        std::vector<const ExpertSample*> fit_samples = train_set;
        for (const auto& ps : partners)
            for (const auto& s : ps) fit_samples.push_back(&s);
        fit_standardization(res.params, fit_samples);
    }
    init_params(res.params, cfg.seed);

    std::vector<double> theta = flatten(res.params);
    AdamOptimizer adam(theta.size(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    double lr = cfg.learning_rate;
    double best_val = kInf;
    int since_best = 0;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sum_sup = 0, sum_nce = 0, sum_aux = 0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::vector<TrainPair> batch;
            for (std::size_t i = start;
                 i < std::min(order.size(), start + cfg.batch_size); ++i) {
                TrainPair pr;
                pr.ori = train_set[order[i]];
                if (k > 0) pr.aug = &partners[order[i]][epoch % k];
                batch.push_back(pr);
            }
            GcnnParams grads = make_zero_params();
            LossBreakdown lb = total_loss(res.params, batch, cfg, &grads);
            adam.step(theta, flatten(grads), lr);
            unflatten(res.params, theta);
            sum_sup += lb.sup;
            sum_nce += lb.nce;
            sum_aux += lb.aux;
            ++batches;
        }

        EpochStats st;
        st.epoch = epoch;
        st.l_sup = sum_sup / batches;
        st.l_nce = sum_nce / batches;
        st.l_aux = sum_aux / batches;
        st.lr = lr;
        const auto& monitor_set = val_set.empty() ? train_set : val_set;
        double vs = 0;
        for (const auto* s : monitor_set)
            vs += loss_sup(gcnn_forward(res.params, s->state).probs, s->action);
        st.val_sup = vs / static_cast<double>(monitor_set.size());
        std::vector<ExpertSample> vcopy;
        for (const auto* s : monitor_set) vcopy.push_back(*s);
        st.val_acc1 = eval_topk(res.params, vcopy, {1}).acc[0];
        res.history.push_back(st);

        if (st.val_sup < best_val - 1e-6) {
            best_val = st.val_sup;
            since_best = 0;
        } else if (++since_best >= cfg.plateau_patience) {
            lr *= cfg.plateau_factor;
            since_best = 0;
        }
    }
    return res;
}

}  // namespace camlab
