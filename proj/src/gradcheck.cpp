#include "nvx/gradcheck.hpp"

#include "nvx/model.hpp"

#include "json.hpp"

namespace nvx {

namespace {

constexpr double kStep = 1e-6;

void fill(Mat& m, Rng& rng, double scale = 1.0) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.gaussian();
}

void fill(Vec& v, Rng& rng, double scale = 1.0) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = scale * rng.gaussian();
}

GradCheckEntry check_dense(Rng& rng, bool perturb) {
    Mat wd(4, 3), x(2, 3), proj(2, 4);
    Vec b(4);
    fill(wd, rng, 0.5);
    fill(x, rng);
    fill(proj, rng);
    fill(b, rng, 0.2);

    Mat dwd = Mat::Zero(4, 3), dx(2, 3);
    Vec db = Vec::Zero(4);
    dense_backward(wd, x, proj, dwd, db, dx);
    if (perturb) dwd *= 1.5;

    const std::vector<TensorRef> refs = {tensor_ref(wd, dwd), tensor_ref(b, db),
                                         tensor_ref(x, dx)};
    const double err = grad_check(
        refs, [&]() { return dense_forward(wd, b, x).cwiseProduct(proj).sum(); }, kStep);
    return {"dense", err, 1e-7, false};
}

GradCheckEntry check_gru(Rng& rng) {
    GruParams p;
    p.init_zero(3, 4);
    fill(p.wz, rng, 0.5);
    fill(p.wr, rng, 0.5);
    fill(p.wh, rng, 0.5);
    fill(p.uz, rng, 0.5);
    fill(p.ur, rng, 0.5);
    fill(p.uh, rng, 0.5);
    fill(p.bz, rng, 0.2);
    fill(p.br, rng, 0.2);
    fill(p.bh, rng, 0.2);
    Mat x(2, 3), h_prev(2, 4), proj(2, 4);
    fill(x, rng);
    fill(h_prev, rng, 0.5);
    fill(proj, rng);

    GruGrads g;
    g.init_zero(3, 4);
    GruCache cache;
    gru_forward(p, x, h_prev, &cache);
    Mat dx(2, 3), dh_prev(2, 4);
    gru_backward(p, x, h_prev, cache, proj, g, dx, dh_prev);

    const std::vector<TensorRef> refs = {
        tensor_ref(p.wz, g.wz), tensor_ref(p.wr, g.wr), tensor_ref(p.wh, g.wh),
        tensor_ref(p.uz, g.uz), tensor_ref(p.ur, g.ur), tensor_ref(p.uh, g.uh),
        tensor_ref(p.bz, g.bz), tensor_ref(p.br, g.br), tensor_ref(p.bh, g.bh),
        tensor_ref(x, dx),      tensor_ref(h_prev, dh_prev)};
    const double err = grad_check(
        refs, [&]() { return gru_forward(p, x, h_prev, nullptr).cwiseProduct(proj).sum(); },
        kStep);
    return {"gru_cell", err, 1e-5, false};
}

GradCheckEntry check_attention(Rng& rng) {
    Mat h_enc(5, 4), w(4, 3);
    Vec q(3), proj(4);
    fill(h_enc, rng, 0.7);
    fill(w, rng, 0.5);
    fill(q, rng, 0.7);
    fill(proj, rng);

    Vec context, alpha;
    attention_step(h_enc, q, w, context, alpha);
    Mat dh_enc = Mat::Zero(5, 4), dw = Mat::Zero(4, 3);
    Vec dq = Vec::Zero(3);
    attention_backward(h_enc, q, w, alpha, proj, dh_enc, dq, dw);

    const std::vector<TensorRef> refs = {tensor_ref(h_enc, dh_enc), tensor_ref(w, dw),
                                         tensor_ref(q, dq)};
    const double err = grad_check(
        refs,
        [&]() {
            Vec c, a;
            attention_step(h_enc, q, w, c, a);
            return c.dot(proj);
        },
        kStep);
    return {"attention_step", err, 1e-5, false};
}

GradCheckEntry check_masked_mse(Rng& rng) {
    Mat pred(4, 3), target(4, 3);
    Vec mask(4);
    fill(pred, rng);
    fill(target, rng);
    mask << 1, 0, 1, 1;
    const Mat dpred = masked_mse_grad(pred, target, mask);
    const std::vector<TensorRef> refs = {tensor_ref(pred, dpred)};
    const double err =
        grad_check(refs, [&]() { return masked_mse(pred, target, mask); }, kStep);
    return {"masked_mse", err, 1e-7, false};
}

GradCheckEntry check_full_model(Rng& rng) {
    ModelDims dims{3, 5, 5, 2};
    ModelParams m = init_attention_model_dims(dims, rng.next_u64());

    Mat x0(4, 3), y0(4, 2), x1(3, 3), y1(3, 2);
    fill(x0, rng);
    fill(y0, rng);
    fill(x1, rng);
    fill(y1, rng);
    const Batch batch = pack_batch({&x0, &x1}, {&y0, &y1});

    ModelGrads g;
    g.init_zero(dims);
    attention_batch_grad(m, batch, nullptr, g);

    const std::vector<TensorRef> refs = param_refs(m, g);
    const double err =
        grad_check(refs, [&]() { return attention_batch_loss(m, batch); }, kStep);
    return {"full_model", err, 1e-4, false};
}

}  // namespace

GradCheckReport run_gradcheck_suite(std::uint64_t seed, bool perturb) {
    Rng rng(Rng::derive(seed, 0x9C));
    GradCheckReport report;
    report.entries.push_back(check_dense(rng, perturb));
    report.entries.push_back(check_gru(rng));
    report.entries.push_back(check_attention(rng));
    report.entries.push_back(check_masked_mse(rng));
    report.entries.push_back(check_full_model(rng));
    report.all_pass = true;
    for (GradCheckEntry& e : report.entries) {
        e.pass = e.worst_rel_error <= e.tolerance;
        report.all_pass = report.all_pass && e.pass;
    }
    return report;
}

std::string gradcheck_to_json(const GradCheckReport& r) {
    nlohmann::ordered_json j;
    j["ops"] = nlohmann::ordered_json::array();
    for (const GradCheckEntry& e : r.entries)
        j["ops"].push_back({{"op", e.op},
                            {"worst_rel_error", e.worst_rel_error},
                            {"tolerance", e.tolerance},
                            {"pass", e.pass}});
    j["all_pass"] = r.all_pass;
    return j.dump(2) + "\n";
}

}  // namespace nvx
