#pragma once

#include "distance.hpp"
#include "envelope.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "field_io.hpp"
#include "insertion.hpp"
#include "mask_io.hpp"
#include "regularity.hpp"
#include "separation.hpp"
