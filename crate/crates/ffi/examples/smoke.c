#include "ctk.h"
#include <stdio.h>
int main(void){
  double re[64]; for(int i=0;i<64;i++) re[i]=i*0.1;
  CtkSignal *s=NULL; CtkStatus st=ctk_signal_new(0,0.1,re,NULL,64,&s);
  double e=0; ctk_energy(s,&e);
  printf("%s %d %zu %f\n", ctk_version(), st, ctk_signal_len(s), e);
  st=ctk_signal_new(0,-1,re,NULL,64,&s); printf("%d %s\n", st, ctk_last_error_message());
  ctk_signal_free(s); return 0;}
