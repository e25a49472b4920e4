#include "prunelab/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prunelab {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_doubles_le(std::ostream& out, const std::vector<double>& v) {
    for (double d : v) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<char*>(b), 8);
    }
}

void read_doubles_le(std::istream& in, std::vector<double>& v, const std::string& path) {
    for (double& d : v) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
        d = std::bit_cast<double>(bits);
    }
}

// arrays in header order: per parameterized layer w/b/m, then velocities
template <typename Fn>
void for_each_array(const Network& net, const OptState& opt, Fn&& fn) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_params()) continue;
        fn("w" + std::to_string(i), net.layers[i].weights);
        fn("b" + std::to_string(i), net.layers[i].bias);
        fn("m" + std::to_string(i), net.layers[i].mask);
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].has_params()) continue;
        fn("vw" + std::to_string(i), opt.vel_w[i]);
        fn("vb" + std::to_string(i), opt.vel_b[i]);
    }
}

}  // namespace

Checkpoint Checkpoint::from_network(const Network& net, const OptState& opt,
                                    TrainHistory history, std::string config_hash) {
    Checkpoint ck;
    ck.arch = net.spec.str();
    ck.config_hash = std::move(config_hash);
    ck.net = net;
    ck.opt = opt;
    ck.history = std::move(history);
    return ck;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path);
    out << "PRUNELAB-CKPT v" << kFormatVersion << "\n";
    out << "arch " << arch << "\n";
    out << "config_hash " << config_hash << "\n";
    out << "history " << history.size() << "\n";
    for (const auto& h : history)
        out << "h " << h.epoch << " " << fmt_double(h.loss) << " " << fmt_double(h.train_acc)
            << " " << fmt_double(h.lr) << "\n";
    for_each_array(net, opt, [&](const std::string& name, const Tensor& t) {
        out << "array " << name << " " << t.numel() << "\n";
    });
    out << "DATA\n";
    for_each_array(net, opt, [&](const std::string&, const Tensor& t) {
        write_doubles_le(out, t.data);
    });
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    std::string line;

    auto next_line = [&]() {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated checkpoint: " + path);
        return line;
    };

    if (next_line() != "PRUNELAB-CKPT v1")
        throw std::runtime_error("bad checkpoint header in " + path);

    Checkpoint ck;
    next_line();
    if (line.rfind("arch ", 0) != 0) throw std::runtime_error("missing arch in " + path);
    ck.arch = line.substr(5);
    next_line();
    if (line.rfind("config_hash ", 0) != 0)
        throw std::runtime_error("missing config_hash in " + path);
    ck.config_hash = line.substr(12);
    next_line();
    if (line.rfind("history ", 0) != 0)
        throw std::runtime_error("missing history in " + path);
    const std::size_t hist_n = std::stoull(line.substr(8));
    for (std::size_t i = 0; i < hist_n; ++i) {
        next_line();
        std::stringstream ss(line);
        std::string tag;
        EpochStats st{};
        ss >> tag >> st.epoch >> st.loss >> st.train_acc >> st.lr;
        if (tag != "h" || !ss) throw std::runtime_error("bad history row in " + path);
        ck.history.push_back(st);
    }

    ck.net = build_network(ArchSpec::parse(ck.arch), 0);
    ck.opt = OptState::zeros_like(ck.net);

    std::vector<std::pair<std::string, std::size_t>> toc;
    while (next_line() != "DATA") {
        if (line.rfind("array ", 0) != 0)
            throw std::runtime_error("bad table-of-contents line in " + path);
        std::stringstream ss(line.substr(6));
        std::string name;
        std::size_t n;
        ss >> name >> n;
        toc.emplace_back(name, n);
    }

    std::size_t idx = 0;
    for_each_array(ck.net, ck.opt, [&](const std::string& name, const Tensor& t) {
        if (idx >= toc.size() || toc[idx].first != name || toc[idx].second != t.numel())
            throw std::runtime_error("checkpoint array mismatch at '" + name + "' in " + path);
        read_doubles_le(in, const_cast<Tensor&>(t).data, path);
        ++idx;
    });
    if (idx != toc.size())
        throw std::runtime_error("unexpected extra arrays in " + path);
    infer_shapes(ck.net);
    return ck;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch,loss,train_acc,lr\n";
    char buf[128];
    for (const auto& h : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6g\n", h.epoch, h.loss,
                      h.train_acc, h.lr);
        out << buf;
    }
}

}  // namespace prunelab
