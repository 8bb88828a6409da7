// Runs the acceptance checks and prints one line per criterion.
//   acceptance              all of them
//   acceptance --only 6     just one (ctest registers each separately)
//   acceptance --seed N --threads K

#include <fkpath/verify.hpp>

#include <CLI11.hpp>

#include <cstdio>

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::vector<int> only;
    fkpath::verify::Options o;
    app.add_option("--only", only, "criterion ids");
    app.add_option("--seed", o.seed, "master seed");
    app.add_option("--threads", o.threads, "worker count");
    CLI11_PARSE(app, argc, argv);
    o.threads = fkpath::resolve_threads(o.threads);

    std::vector<int> ids = only;
    if (ids.empty()) ids = fkpath::verify::suite_members("all");
    int failed = 0;
    for (int id : ids) {
        fkpath::verify::CriterionResult r;
        try {
            r = fkpath::verify::run_criterion(id, o);
        } catch (const std::exception& e) {
            r.id = id;
            r.title = "criterion " + std::to_string(id);
            r.detail = std::string("threw: ") + e.what();
        }
        std::printf("[%s] %2d %s: %s\n", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(), r.detail.c_str());
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
    }
    std::printf("%zu criteria, %d failed\n", ids.size(), failed);
    return failed ? 1 : 0;
}
