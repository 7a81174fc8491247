#include "partsum/heads.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace partsum {

int Vocab::triplet_index(int s, int p, int o) const {
    for (std::size_t i = 0; i < triplet_vocab.size(); ++i) {
        if (triplet_vocab[i][0] == s && triplet_vocab[i][1] == p && triplet_vocab[i][2] == o) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

void Vocab::validate() const {
    if (n_entity < 1) throw ConfigError("vocab: n_entity must be >= 1");
    if (n_predicate < 1) throw ConfigError("vocab: n_predicate must be >= 1");
    for (const auto& t : triplet_vocab) {
        if (t[0] < 0 || t[0] >= n_entity || t[1] < 0 || t[1] >= n_predicate || t[2] < 0 || t[2] >= n_entity) {
            throw ConfigError("vocab: triplet (" + std::to_string(t[0]) + "," + std::to_string(t[1]) + "," +
                              std::to_string(t[2]) + ") outside label spaces");
        }
    }
    for (std::size_t i = 0; i < triplet_vocab.size(); ++i)
        for (std::size_t j = i + 1; j < triplet_vocab.size(); ++j)
            if (triplet_vocab[i] == triplet_vocab[j]) {
                throw ConfigError("vocab: duplicate triplet entry at positions " + std::to_string(i) + " and " +
                                  std::to_string(j));
            }
}

BoxMlp::BoxMlp(ParameterStore& ps, const std::string& name, int in_dim, int hidden_dim, Rng& rng)
    : fc1_(ps, name + ".fc1", in_dim, hidden_dim, rng),
      fc2_(ps, name + ".fc2", hidden_dim, hidden_dim, rng),
      fc3_(ps, name + ".fc3", hidden_dim, 4, rng) {}

Tensor BoxMlp::forward(const Tensor& x) const {
    return sigmoid(fc3_.forward(relu(fc2_.forward(relu(fc1_.forward(x))))));
}

PartHeads::PartHeads(ParameterStore& ps, const std::string& name, int model_dim, const Vocab& vocab, Rng& rng) {
    vocab.validate();
    cls_s_ = Linear(ps, name + ".cls_s", model_dim, vocab.entity_classes(), rng);
    cls_o_ = Linear(ps, name + ".cls_o", model_dim, vocab.entity_classes(), rng);
    cls_p_ = Linear(ps, name + ".cls_p", model_dim, vocab.predicate_classes(), rng);
    cls_spo_ = Linear(ps, name + ".cls_spo", 3 * model_dim, vocab.triplet_classes(), rng);
    box_s_ = BoxMlp(ps, name + ".box_s", model_dim, model_dim, rng);
    box_o_ = BoxMlp(ps, name + ".box_o", model_dim, model_dim, rng);
    box_p_ = BoxMlp(ps, name + ".box_p", model_dim, model_dim, rng);
}

void PartHeads::predict(const Tensor& part_emb, CompositePrediction& out) const {
    if (part_emb.ndim() != 3 || part_emb.dim(1) != 3 || part_emb.dim(2) != cls_s_.in_dim()) {
        throw ShapeError("part_predict: expected [M x 3 x " + std::to_string(cls_s_.in_dim()) + "], got " +
                         shape_str(part_emb.shape()));
    }
    const int m = part_emb.dim(0);
    const int d = part_emb.dim(2);
    Tensor flat = reshape(part_emb, {3 * m, d});
    std::vector<int> s_idx(m), o_idx(m), p_idx(m);
    for (int i = 0; i < m; ++i) {
        s_idx[i] = 3 * i;
        o_idx[i] = 3 * i + 1;
        p_idx[i] = 3 * i + 2;
    }
    Tensor qs = take_rows(flat, s_idx);
    Tensor qo = take_rows(flat, o_idx);
    Tensor qp = take_rows(flat, p_idx);

    out.n_queries = m;
    out.has_part = true;
    out.part_s_logit = cls_s_.forward(qs);
    out.part_o_logit = cls_o_.forward(qo);
    out.part_p_logit = cls_p_.forward(qp);
    out.part_spo_logit = cls_spo_.forward(concat_cols({qs, qo, qp}));
    out.part_s_prob = softmax_rows(out.part_s_logit);
    out.part_o_prob = softmax_rows(out.part_o_logit);
    out.part_p_prob = softmax_rows(out.part_p_logit);
    out.part_spo_prob = softmax_rows(out.part_spo_logit);
    out.part_s_box = box_s_.forward(qs);
    out.part_o_box = box_o_.forward(qo);
    out.part_p_box = box_p_.forward(qp);
}

SumHeads::SumHeads(ParameterStore& ps, const std::string& name, int model_dim, const Vocab& vocab, Rng& rng) {
    vocab.validate();
    cls_s_ = Linear(ps, name + ".cls_s", model_dim, vocab.entity_classes(), rng);
    cls_o_ = Linear(ps, name + ".cls_o", model_dim, vocab.entity_classes(), rng);
    cls_p_ = Linear(ps, name + ".cls_p", model_dim, vocab.predicate_classes(), rng);
    box_s_ = BoxMlp(ps, name + ".box_s", model_dim, model_dim, rng);
    box_o_ = BoxMlp(ps, name + ".box_o", model_dim, model_dim, rng);
    box_p_ = BoxMlp(ps, name + ".box_p", model_dim, model_dim, rng);
}

void SumHeads::predict(const Tensor& sum_emb, CompositePrediction& out) const {
    if (sum_emb.ndim() != 2 || sum_emb.dim(1) != cls_s_.in_dim()) {
        throw ShapeError("sum_predict: expected [M x " + std::to_string(cls_s_.in_dim()) + "], got " +
                         shape_str(sum_emb.shape()));
    }
    out.n_queries = sum_emb.dim(0);
    out.has_sum = true;
    out.sum_s_logit = cls_s_.forward(sum_emb);
    out.sum_o_logit = cls_o_.forward(sum_emb);
    out.sum_p_logit = cls_p_.forward(sum_emb);
    out.sum_s_prob = softmax_rows(out.sum_s_logit);
    out.sum_o_prob = softmax_rows(out.sum_o_logit);
    out.sum_p_prob = softmax_rows(out.sum_p_logit);
    out.sum_s_box = box_s_.forward(sum_emb);
    out.sum_o_box = box_o_.forward(sum_emb);
    out.sum_p_box = box_p_.forward(sum_emb);
}

const char* to_string(InferenceMode m) {
    switch (m) {
        case InferenceMode::part_only: return "part-only";
        case InferenceMode::sum_only: return "sum-only";
        case InferenceMode::part_sum: return "part-sum";
    }
    return "?";
}

InferenceMode inference_mode_from_string(const std::string& s) {
    if (s == "part-only") return InferenceMode::part_only;
    if (s == "sum-only") return InferenceMode::sum_only;
    if (s == "part-sum") return InferenceMode::part_sum;
    throw ConfigError("unknown inference mode '" + s + "' (expected part-only|sum-only|part-sum)");
}

namespace {

std::vector<double> row_of(const Tensor& t, int r) {
    const int c = t.cols();
    const double* p = t.data().data() + static_cast<std::size_t>(r) * c;
    return std::vector<double>(p, p + c);
}

Box box_of(const Tensor& t, int r) {
    Box b;
    b.cx = t.at(static_cast<std::size_t>(r) * 4);
    b.cy = t.at(static_cast<std::size_t>(r) * 4 + 1);
    b.w = t.at(static_cast<std::size_t>(r) * 4 + 2);
    b.h = t.at(static_cast<std::size_t>(r) * 4 + 3);
    return b;
}

std::vector<double> average(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = 0.5 * (a[i] + b[i]);
    return out;
}

Box average_corners(const Box& a, const Box& b) {
    return Box::from_corners(0.5 * (a.x1() + b.x1()), 0.5 * (a.y1() + b.y1()), 0.5 * (a.x2() + b.x2()),
                             0.5 * (a.y2() + b.y2()));
}

}  // namespace

std::vector<QueryOutput> combine_inference(const CompositePrediction& pred, InferenceMode mode) {
    if ((mode == InferenceMode::part_only || mode == InferenceMode::part_sum) && !pred.has_part) {
        throw ConfigError(std::string("combine_inference: mode ") + to_string(mode) +
                          " needs part predictions, but the prediction has none");
    }
    if ((mode == InferenceMode::sum_only || mode == InferenceMode::part_sum) && !pred.has_sum) {
        throw ConfigError(std::string("combine_inference: mode ") + to_string(mode) +
                          " needs sum predictions, but the prediction has none");
    }
    std::vector<QueryOutput> out(static_cast<std::size_t>(pred.n_queries));
    for (int i = 0; i < pred.n_queries; ++i) {
        QueryOutput& q = out[static_cast<std::size_t>(i)];
        switch (mode) {
            case InferenceMode::part_only:
                q.s_prob = row_of(pred.part_s_prob, i);
                q.o_prob = row_of(pred.part_o_prob, i);
                q.p_prob = row_of(pred.part_p_prob, i);
                q.s_box = box_of(pred.part_s_box, i);
                q.o_box = box_of(pred.part_o_box, i);
                break;
            case InferenceMode::sum_only:
                q.s_prob = row_of(pred.sum_s_prob, i);
                q.o_prob = row_of(pred.sum_o_prob, i);
                q.p_prob = row_of(pred.sum_p_prob, i);
                q.s_box = box_of(pred.sum_s_box, i);
                q.o_box = box_of(pred.sum_o_box, i);
                break;
            case InferenceMode::part_sum:
                q.s_prob = average(row_of(pred.part_s_prob, i), row_of(pred.sum_s_prob, i));
                q.o_prob = average(row_of(pred.part_o_prob, i), row_of(pred.sum_o_prob, i));
                q.p_prob = average(row_of(pred.part_p_prob, i), row_of(pred.sum_p_prob, i));
                q.s_box = average_corners(box_of(pred.part_s_box, i), box_of(pred.sum_s_box, i));
                q.o_box = average_corners(box_of(pred.part_o_box, i), box_of(pred.sum_o_box, i));
                break;
        }
    }
    return out;
}

namespace {

nlohmann::json top_k_json(const std::vector<double>& dist, int top_k) {
    std::vector<int> order(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] > dist[b]; });
    const int n = std::min<int>(top_k, static_cast<int>(dist.size()));
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < n; ++i) arr.push_back({order[i], dist[order[i]]});
    return arr;
}

std::vector<double> dense_from_pairs(const nlohmann::json& arr, int classes, const char* field) {
    std::vector<double> dist(static_cast<std::size_t>(classes), 0.0);
    for (const auto& pair : arr) {
        const int label = pair.at(0).get<int>();
        if (label < 0 || label >= classes) {
            throw DataError(std::string("prediction dump: label ") + std::to_string(label) + " out of range in '" +
                            field + "'");
        }
        dist[static_cast<std::size_t>(label)] = pair.at(1).get<double>();
    }
    return dist;
}

Box box_from_json(const nlohmann::json& arr) {
    if (!arr.is_array() || arr.size() != 4) throw DataError("prediction dump: box must be [cx,cy,w,h]");
    Box b;
    b.cx = arr[0].get<double>();
    b.cy = arr[1].get<double>();
    b.w = arr[2].get<double>();
    b.h = arr[3].get<double>();
    return b;
}

}  // namespace

void dump_predictions_jsonl(std::ostream& os, const std::vector<QueryOutput>& queries, int top_k) {
    if (top_k < 1) throw ConfigError("prediction dump: top_k must be >= 1");
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const QueryOutput& q = queries[i];
        nlohmann::json rec;
        rec["query"] = i;
        rec["s"] = top_k_json(q.s_prob, top_k);
        rec["o"] = top_k_json(q.o_prob, top_k);
        rec["p"] = top_k_json(q.p_prob, top_k);
        rec["s_box"] = {q.s_box.cx, q.s_box.cy, q.s_box.w, q.s_box.h};
        rec["o_box"] = {q.o_box.cx, q.o_box.cy, q.o_box.w, q.o_box.h};
        os << rec.dump() << "\n";
    }
}

std::vector<QueryOutput> load_predictions_jsonl(std::istream& is, const Vocab& vocab) {
    std::vector<QueryOutput> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("prediction dump line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            QueryOutput q;
            q.s_prob = dense_from_pairs(rec.at("s"), vocab.entity_classes(), "s");
            q.o_prob = dense_from_pairs(rec.at("o"), vocab.entity_classes(), "o");
            q.p_prob = dense_from_pairs(rec.at("p"), vocab.predicate_classes(), "p");
            q.s_box = box_from_json(rec.at("s_box"));
            q.o_box = box_from_json(rec.at("o_box"));
            out.push_back(std::move(q));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("prediction dump line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
    vocab.validate();
    nlohmann::json j;
    j["n_entity"] = vocab.n_entity;
    j["n_predicate"] = vocab.n_predicate;
    j["triplet_vocab"] = nlohmann::json::array();
    for (const auto& t : vocab.triplet_vocab) j["triplet_vocab"].push_back({t[0], t[1], t[2]});
    std::ofstream os(path);
    if (!os) throw DataError("cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
    if (!os) throw DataError("failed to write '" + path + "'");
}

Vocab load_vocab(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("vocab file '" + path + "': " + e.what());
    }
    Vocab v;
    try {
        v.n_entity = j.at("n_entity").get<int>();
        v.n_predicate = j.at("n_predicate").get<int>();
        for (const auto& t : j.at("triplet_vocab")) {
            if (!t.is_array() || t.size() != 3) throw DataError("vocab file '" + path + "': malformed triplet entry");
            v.triplet_vocab.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("vocab file '" + path + "': " + e.what());
    }
    try {
        v.validate();
    } catch (const Error& e) {
        throw DataError("vocab file '" + path + "': " + e.what());
    }
    return v;
}

}  // namespace partsum
