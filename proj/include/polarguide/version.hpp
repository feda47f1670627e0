#pragma once

#define POLARGUIDE_VERSION "0.3.0"
