#pragma once

#include <boost/random/uniform_int_distribution.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace tiltwise {

using Engine = std::mt19937_64;

//! Independent stream for (master seed, path...). The same arguments always
//! give the same stream, on any platform.
inline Engine make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {})
{
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

//! Child seed for (master, path...), via splitmix64 mixing.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path)
{
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(master);
  for (std::uint64_t p : path)
    h = mix(h ^ mix(p));
  return h;
}

//! Fisher-Yates, written out so the permutation is library-independent.
template <typename T>
void shuffle(std::vector<T>& items, Engine& engine)
{
  for (std::size_t i = items.size(); i > 1; --i) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(items[i - 1], items[pick(engine)]);
  }
}

} // namespace tiltwise
