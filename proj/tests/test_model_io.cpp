#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "nearfield/errors.hpp"
#include "nearfield/model_io.hpp"

using namespace nearfield;

namespace {

LocatorModel trained_like_model(std::uint64_t seed) {
  Rng rng(seed);
  Architecture arch = desk_architecture(8, 2);
  LocatorModel m(arch, LabelScaler{Vec3(0.1, -0.7, -0.6), Vec3(0.9, 0.75, 0.8)});
  m.initialize(rng);
  // Move the running statistics away from their defaults.
  Rng d(1);
  model_forward(m, testing::random_tensor({4, 2, 8, 8}, rng), Mode::Train, &d);
  return m;
}

std::string bytes_of(LocatorModel& m) {
  std::ostringstream s;
  write_model(m, s);
  return s.str();
}

}  // namespace

TEST_CASE("model round trip is bit exact") {
  LocatorModel m = trained_like_model(3);
  const std::string bytes = bytes_of(m);
  std::istringstream in(bytes);
  LocatorModel back = read_model(in);
  CHECK(back.architecture() == m.architecture());
  CHECK(back.scaler() == m.scaler());
  CHECK(bytes_of(back) == bytes);

  Rng rng(4);
  const Tensor x = testing::random_tensor({3, 2, 8, 8}, rng);
  const Tensor a = model_forward(m, x, Mode::Infer);
  const Tensor b = model_forward(back, x, Mode::Infer);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-10);
  CHECK(a == b);

  const auto path = std::filesystem::temp_directory_path() / "nearfield_test_model.nfm";
  write_model(m, path);
  LocatorModel from_file = read_model(path);
  CHECK(bytes_of(from_file) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("softmax flag survives serialization") {
  Rng rng(5);
  Architecture arch = desk_architecture(6, 1);
  arch.output_activation = OutputActivation::Softmax;
  LocatorModel m(arch);
  m.initialize(rng);
  std::istringstream in(bytes_of(m));
  CHECK(read_model(in).architecture().output_activation == OutputActivation::Softmax);
}

TEST_CASE("corrupted model files are rejected with positions") {
  LocatorModel m = trained_like_model(6);
  const std::string good = bytes_of(m);
  const std::size_t header = good.find("end\n") + 4;

  SUBCASE("truncated payload") {
    std::istringstream in(good.substr(0, good.size() - 12));
    try {
      read_model(in);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == good.size() - 12);
      CHECK(e.offset() > header);
    }
  }
  SUBCASE("bad magic") {
    std::istringstream in("XXMODEL 1\n" + good.substr(good.find('\n') + 1));
    try {
      read_model(in);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
  }
  SUBCASE("bad number in header") {
    std::string bad = good;
    const auto at = bad.find("dropout ");
    bad.replace(at + 8, 3, "abc");
    std::istringstream in(bad);
    try {
      read_model(in);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == at);
    }
  }
  SUBCASE("tensor table mismatch") {
    std::string bad = good;
    const auto at = bad.find("tensor ");
    const auto end = bad.find('\n', at);
    bad.replace(at, end - at, "tensor bogus 3");
    std::istringstream in(bad);
    try {
      read_model(in);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == at);
    }
  }
  SUBCASE("trailing bytes") {
    std::istringstream in(good + "\x01");
    CHECK_THROWS_AS(read_model(in), FormatError);
  }
}
