// Writes the synthetic sample datasets under data/.
//
//   make_synthetic <out_dir> [count] [seed]

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <coherencekit/synthetic.hpp>

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: make_synthetic <out_dir> [count] [seed]\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  const int count = argc > 2 ? std::atoi(argv[2]) : 60;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 7;
  std::filesystem::create_directories(dir);

  auto write = [&](const char* name, const coherencekit::Dataset& ds) {
    std::ofstream out(dir / name);
    coherencekit::write_dataset(out, ds);
    std::cout << "wrote " << ds.examples.size() << " examples to " << (dir / name).string() << '\n';
  };
  write("synthetic_entailment.jsonl", coherencekit::synthetic::entailment(count, seed));
  write("synthetic_choice.jsonl", coherencekit::synthetic::choice(count, seed));
  write("adversary_entailment.jsonl", coherencekit::synthetic::adversary_fixture());
  return 0;
}
