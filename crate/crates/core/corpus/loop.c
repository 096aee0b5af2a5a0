/* AbsoluteValue with a hand-written loop in the output function */
#include "rtwtypes.h"

typedef struct {
  uint8_T is_active_c1_AbsoluteValue;
  uint8_T is_c1_AbsoluteValue;
} D_Work_AbsoluteValue;

typedef struct {
  int32_T y;
} BlockIO_AbsoluteValue;

typedef struct {
  int32_T u;
} ExternalInputs_AbsoluteValue;

typedef struct {
  int32_T y;
} ExternalOutputs_AbsoluteValue;

#define AbsoluteValue_IN_N ((uint8_T)2U)
#define AbsoluteValue_IN_P ((uint8_T)1U)

D_Work_AbsoluteValue AbsoluteValue_DWork;
BlockIO_AbsoluteValue AbsoluteValue_B;
ExternalInputs_AbsoluteValue AbsoluteValue_U;
ExternalOutputs_AbsoluteValue AbsoluteValue_Y;

void AbsoluteValue_output(int_T tid)
{
  if (AbsoluteValue_DWork.is_active_c1_AbsoluteValue == 0) {
    AbsoluteValue_DWork.is_active_c1_AbsoluteValue = 1U;
    if ((AbsoluteValue_U.u >= 0) != 0) {
      AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)AbsoluteValue_IN_P;
    } else {
      AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)AbsoluteValue_IN_N;
    }
  } else {
    if (AbsoluteValue_DWork.is_c1_AbsoluteValue == AbsoluteValue_IN_P) {
      if ((AbsoluteValue_U.u < 0) != 0) {
        AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)0U;
        AbsoluteValue_B.y = -AbsoluteValue_U.u;
        AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)AbsoluteValue_IN_N;
      } else {
        AbsoluteValue_B.y = AbsoluteValue_U.u;
      }
    } else if (AbsoluteValue_DWork.is_c1_AbsoluteValue == AbsoluteValue_IN_N) {
      if ((AbsoluteValue_U.u >= 0) != 0) {
        AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)0U;
        AbsoluteValue_B.y = AbsoluteValue_U.u;
        AbsoluteValue_DWork.is_c1_AbsoluteValue = (uint8_T)AbsoluteValue_IN_P;
      } else {
        AbsoluteValue_B.y = -AbsoluteValue_U.u;
      }
    }
  }
  while (AbsoluteValue_B.y > 100) {
    AbsoluteValue_B.y = AbsoluteValue_B.y - 1;
  }
  AbsoluteValue_Y.y = AbsoluteValue_B.y;
}

void AbsoluteValue_initialize(void)
{
  AbsoluteValue_DWork.is_active_c1_AbsoluteValue = 0U;
  AbsoluteValue_DWork.is_c1_AbsoluteValue = 0U;
  AbsoluteValue_B.y = 0;
  AbsoluteValue_Y.y = 0;
}
